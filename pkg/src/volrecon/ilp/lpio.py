"""LP text-format export (CPLEX LP dialect, readable by common solvers)."""

from __future__ import annotations

from .model import IlpModel, ModelError, SENSE_EQ, SENSE_GE, SENSE_LE

_SENSE_TEXT = {SENSE_LE: "<=", SENSE_GE: ">=", SENSE_EQ: "="}


def _terms(pairs) -> str:
    parts = []
    for name, coef in pairs:
        if coef >= 0:
            parts.append(f"+ {coef:.17g} {name}")
        else:
            parts.append(f"- {abs(coef):.17g} {name}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def export_lp(model: IlpModel) -> str:
    if model.n_vars == 0:
        raise ModelError("no variables to export")
    names = [model.var_name(j) for j in range(model.n_vars)]
    lines = ["Minimize"]
    obj_terms = [(names[j], model.objective[j]) for j in range(model.n_vars)
                 if model.objective[j] != 0.0]
    lines.append(" obj: " + (_terms(obj_terms) if obj_terms else "0 " + names[0]))
    lines.append("Subject To")
    for i, row in enumerate(model.rows):
        pairs = [(names[j], v) for j, v in zip(row.cols, row.vals)]
        lines.append(f" r{i}: " + _terms(pairs) + f" {_SENSE_TEXT[row.sense]} {row.rhs:.17g}")
    lines.append("Binaries")
    for name in names:
        lines.append(f" {name}")
    lines.append("End")
    return "\n".join(lines) + "\n"
