// UI state machine for the steering loop.
//
// Invariants enforced here (and covered by headless tests):
//   - a solve can never be triggered while one is in flight;
//   - the model is re-fetched exactly once per completed solve;
//   - pending constraint edits clear only on successful POST or cancel.

import { ApiClient } from './api.js'
import { CellDoc, ConstraintRequest, ModelDoc } from './types.js'

export type SolveUiState = 'idle' | 'solving' | 'done' | 'failed'

export interface Selection {
  kind: 'cell' | 'wall'
  id: number
}

export class ViewerState {
  model: ModelDoc | null = null
  previousModel: ModelDoc | null = null
  cells: CellDoc[] = []
  solveState: SolveUiState = 'idle'
  statusMessage = ''
  selection: Selection | null = null
  pendingEdits: ConstraintRequest[] = []
  submittedIds: number[] = []
  alpha = 0.04
  visibleStories: [number, number] | null = null
  show = { rooms: true, walls: true, intersections: false, points: false }
  private pollTimer: ReturnType<typeof setTimeout> | null = null
  private listeners: (() => void)[] = []

  /** autoPoll=false hands poll() scheduling to the caller (tests). */
  constructor(private api: ApiClient, private pollIntervalMs = 500,
              private autoPoll = true) {}

  dispose(): void {
    if (this.pollTimer !== null) {
      clearTimeout(this.pollTimer)
      this.pollTimer = null
    }
  }

  onChange(fn: () => void): void {
    this.listeners.push(fn)
  }

  private emit(): void {
    for (const fn of this.listeners) fn()
  }

  get canSolve(): boolean {
    return this.solveState !== 'solving'
  }

  async refreshModel(): Promise<void> {
    this.previousModel = this.model
    this.model = await this.api.getModel()
    this.cells = await this.api.getCells()
    this.emit()
  }

  select(selection: Selection | null): void {
    this.selection = selection
    this.emit()
  }

  addPendingEdit(edit: ConstraintRequest): void {
    this.pendingEdits.push(edit)
    this.emit()
  }

  cancelPendingEdits(): void {
    this.pendingEdits = []
    this.emit()
  }

  async submitEdits(): Promise<boolean> {
    if (this.pendingEdits.length === 0) return true
    try {
      const ids = await this.api.postConstraints(this.pendingEdits)
      this.submittedIds.push(...ids)
      this.pendingEdits = []
      this.emit()
      return true
    } catch (err) {
      this.statusMessage = `constraints rejected: ${(err as Error).message}`
      this.emit()
      return false
    }
  }

  /** Trigger a solve; refuses while one is running. */
  async requestSolve(): Promise<boolean> {
    if (!this.canSolve) {
      this.statusMessage = 'solve already running'
      this.emit()
      return false
    }
    const ok = await this.submitEdits()
    if (!ok) return false
    try {
      await this.api.postSolve(this.alpha)
    } catch (err) {
      this.statusMessage = `solve rejected: ${(err as Error).message}`
      this.solveState = 'failed'
      this.emit()
      return false
    }
    this.solveState = 'solving'
    this.statusMessage = 'solving'
    this.emit()
    this.schedulePoll()
    return true
  }

  private schedulePoll(): void {
    if (!this.autoPoll || this.pollTimer !== null) return
    this.pollTimer = setTimeout(() => {
      this.pollTimer = null
      void this.poll()
    }, this.pollIntervalMs)
  }

  async poll(): Promise<void> {
    const status = await this.api.getSolveStatus()
    if (status.state === 'solving') {
      this.schedulePoll()
      return
    }
    if (this.solveState !== 'solving') return
    if (status.state === 'done') {
      this.solveState = 'done'
      this.statusMessage = `solved (gap ${status.gap ?? 0})`
      await this.refreshModel()
    } else if (status.state === 'failed') {
      this.solveState = 'failed'
      this.statusMessage = `solve failed: ${status.error ?? 'unknown'}`
      this.emit()
    }
  }

  toggleBeforeAfter(): void {
    if (this.previousModel === null) return
    const current = this.model
    this.model = this.previousModel
    this.previousModel = current
    this.emit()
  }
}
