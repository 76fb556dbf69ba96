"""Flat key=value configuration with validated defaults."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(Exception):
    pass


@dataclass
class Config:
    # subsampling / normals
    subsample_min_dist: float = 0.02
    normals_k: int = 16
    # plane detection
    ransac_distance: float = 0.01
    ransac_cluster_eps: float = 0.20
    ransac_normal_tol_deg: float = 6.0
    ransac_min_points: int = 1000
    ransac_miss_prob: float = 0.001
    occupancy_pixel: float = 0.20
    # cleaning
    clean_threshold: float = 0.5
    clean_iterations: int = 3
    clean_rays: int = 64
    # room labeling
    patch_size: float = 0.40
    visibility_eps: float = 0.10
    mcl_inflation: float = 2.0
    # candidates
    multilabel_pixel: float = 0.10
    min_wall_area: float = 2.0
    min_slab_area: float = 5.0
    vertical_tol_deg: float = 10.0
    horizontal_tol_deg: float = 10.0
    pair_max_angle_deg: float = 5.0
    max_thickness: float = 0.6
    virtual_thickness: float = 0.3
    dilation_radius: int = 2
    # priors
    prior_k_base: int = 100
    prior_rays: int = 64
    # optimization
    alpha: float = 0.04
    gap_tol: float = 1e-6
    time_limit: float = 600.0
    prune_room_vars: bool = True
    redundant_outside_rows: bool = True
    # global
    seed: int = 0

    def validate(self) -> None:
        positive = [
            "subsample_min_dist", "ransac_distance", "ransac_cluster_eps",
            "occupancy_pixel", "patch_size", "visibility_eps", "multilabel_pixel",
            "min_wall_area", "min_slab_area", "max_thickness", "virtual_thickness",
            "time_limit",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if not 0 <= self.clean_threshold <= 1:
            raise ConfigError("clean_threshold must be in [0, 1]")
        if self.mcl_inflation <= 1:
            raise ConfigError("mcl_inflation must be > 1")
        if self.clean_iterations < 0 or self.clean_rays < 1:
            raise ConfigError("invalid cleaning parameters")
        if self.ransac_min_points < 3:
            raise ConfigError("ransac_min_points must be >= 3")
        if not 0 < self.ransac_miss_prob < 1:
            raise ConfigError("ransac_miss_prob must be in (0, 1)")
        if self.dilation_radius < 0:
            raise ConfigError("dilation_radius must be >= 0")
        if self.gap_tol < 0:
            raise ConfigError("gap_tol must be >= 0")


_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def parse_config(text: str, base: Config | None = None) -> Config:
    cfg = base or Config()
    types = {f.name: f.type for f in fields(Config)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not hasattr(cfg, key):
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        current = getattr(cfg, key)
        if isinstance(current, bool):
            if value.lower() not in _BOOL:
                raise ConfigError(f"line {lineno}: boolean expected for {key}")
            setattr(cfg, key, _BOOL[value.lower()])
        elif isinstance(current, int):
            try:
                setattr(cfg, key, int(value))
            except ValueError:
                raise ConfigError(f"line {lineno}: integer expected for {key}") from None
        else:
            try:
                setattr(cfg, key, float(value))
            except ValueError:
                raise ConfigError(f"line {lineno}: number expected for {key}") from None
    cfg.validate()
    return cfg


def load_config(path, base: Config | None = None) -> Config:
    return parse_config(Path(path).read_text(), base)


def dump_config(cfg: Config) -> str:
    lines = []
    for f in fields(Config):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"
