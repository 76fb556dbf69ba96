// Plan-view stroke handling: strokes drawn near an existing wall axis
// snap collinear to it before being sent as virtual-wall requests.

import { ModelDoc, VirtualWallRequest } from './types.js'

export const SNAP_DISTANCE = 0.1
export const MIN_STROKE_LENGTH = 0.05

export interface WallAxis {
  point: [number, number]
  dir: [number, number]
}

export function wallAxes(model: ModelDoc): WallAxis[] {
  const axes: WallAxis[] = []
  for (const wall of model.walls) {
    if (wall.kind !== 'wall') continue
    const real = wall.surfaces.find((s) => !s.virtual) ?? wall.surfaces[0]
    const n = real.normal
    const center = wall.surfaces.reduce((acc, s) => {
      // midway between the two planes, measured along the first normal
      const d = s.normal[0] * n[0] + s.normal[1] * n[1] >= 0 ? s.offset : -s.offset
      return acc + d / 2
    }, 0)
    axes.push({
      point: [n[0] * center, n[1] * center],
      dir: [-n[1], n[0]],
    })
  }
  return axes
}

function distToLine(p: [number, number], axis: WallAxis): number {
  const dx = p[0] - axis.point[0]
  const dy = p[1] - axis.point[1]
  return Math.abs(dx * -axis.dir[1] + dy * axis.dir[0])
}

function projectOntoLine(p: [number, number], axis: WallAxis): [number, number] {
  const dx = p[0] - axis.point[0]
  const dy = p[1] - axis.point[1]
  const t = dx * axis.dir[0] + dy * axis.dir[1]
  return [axis.point[0] + t * axis.dir[0], axis.point[1] + t * axis.dir[1]]
}

export function snapStroke(
  p0: [number, number],
  p1: [number, number],
  axes: WallAxis[],
  snapDist = SNAP_DISTANCE,
): [[number, number], [number, number]] {
  for (const axis of axes) {
    if (distToLine(p0, axis) <= snapDist && distToLine(p1, axis) <= snapDist) {
      return [projectOntoLine(p0, axis), projectOntoLine(p1, axis)]
    }
  }
  return [p0, p1]
}

export class StrokeValidationError extends Error {}

export function strokeToRequest(
  p0: [number, number],
  p1: [number, number],
  model: ModelDoc | null,
  story: { z_lo: number; z_hi: number },
  thickness: number,
): VirtualWallRequest {
  const length = Math.hypot(p1[0] - p0[0], p1[1] - p0[1])
  if (length < MIN_STROKE_LENGTH) {
    throw new StrokeValidationError(`stroke too short (${length.toFixed(3)} m)`)
  }
  const [q0, q1] = model ? snapStroke(p0, p1, wallAxes(model)) : [p0, p1]
  return { p0: q0, p1: q1, thickness, z_lo: story.z_lo, z_hi: story.z_hi }
}
