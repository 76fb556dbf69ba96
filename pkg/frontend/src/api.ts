// Thin REST client; everything the UI knows about the backend goes
// through this interface so tests can substitute a fake.

import { CellDoc, ConstraintRequest, ModelDoc, SolveStatus, VirtualWallRequest } from './types.js'

export interface ApiClient {
  getModel(): Promise<ModelDoc>
  getCells(bbox?: number[]): Promise<CellDoc[]>
  getMeshBinary(entity: string): Promise<Float32Array>
  postConstraints(items: ConstraintRequest[]): Promise<number[]>
  deleteConstraint(id: number): Promise<void>
  postVirtualWall(req: VirtualWallRequest): Promise<number>
  postSolve(alpha?: number): Promise<number>
  getSolveStatus(): Promise<SolveStatus>
}

export class HttpApiClient implements ApiClient {
  constructor(private base: string) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.base + path, init)
    if (!resp.ok) {
      let detail = `${resp.status}`
      try {
        const body = await resp.json()
        if (body && body.error) detail = `${resp.status}: ${body.error}`
      } catch {
        // non-JSON error body
      }
      throw new Error(`request failed (${detail})`)
    }
    return (await resp.json()) as T
  }

  getModel(): Promise<ModelDoc> {
    return this.json<ModelDoc>('/model')
  }

  async getCells(bbox?: number[]): Promise<CellDoc[]> {
    const query = bbox ? `?bbox=${bbox.join(',')}` : ''
    const doc = await this.json<{ cells: CellDoc[] }>(`/cells${query}`)
    return doc.cells
  }

  async getMeshBinary(entity: string): Promise<Float32Array> {
    const resp = await fetch(`${this.base}/mesh/${entity}?format=bin`)
    if (!resp.ok) throw new Error(`mesh request failed (${resp.status})`)
    const buf = await resp.arrayBuffer()
    const count = new DataView(buf).getUint32(0, true)
    return new Float32Array(buf, 4, count * 9)
  }

  async postConstraints(items: ConstraintRequest[]): Promise<number[]> {
    const doc = await this.json<{ ids: number[] }>('/constraints', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(items),
    })
    return doc.ids
  }

  async deleteConstraint(id: number): Promise<void> {
    await this.json(`/constraints/${id}`, { method: 'DELETE' })
  }

  async postVirtualWall(req: VirtualWallRequest): Promise<number> {
    const doc = await this.json<{ wall: number }>('/walls/virtual', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(req),
    })
    return doc.wall
  }

  async postSolve(alpha?: number): Promise<number> {
    const doc = await this.json<{ job: number }>('/solve', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(alpha === undefined ? {} : { alpha }),
    })
    return doc.job
  }

  getSolveStatus(): Promise<SolveStatus> {
    return this.json<SolveStatus>('/solve/status')
  }
}
