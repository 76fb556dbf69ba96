// Cell picking: a ray from the camera through the clicked pixel is
// clipped against each prism cell (convex half-space intersection); the
// first boundary hit, nudged inward along the ray, selects the cell
// containing it.

import { CellDoc, Vec3 } from './types.js'

export interface Ray {
  origin: Vec3
  dir: Vec3
}

const EPS = 1e-9

export function pointInPolygon(x: number, y: number, polygon: number[][]): boolean {
  let inside = false
  const n = polygon.length
  for (let i = 0; i < n; i++) {
    const [x0, y0] = polygon[i]
    const [x1, y1] = polygon[(i + 1) % n]
    if (y0 > y !== y1 > y) {
      const xs = x0 + ((y - y0) / (y1 - y0)) * (x1 - x0)
      if (x < xs) inside = !inside
    }
  }
  return inside
}

export function pointInCell(p: Vec3, cell: CellDoc): boolean {
  if (p.z < cell.z[0] - EPS || p.z > cell.z[1] + EPS) return false
  return pointInPolygon(p.x, p.y, cell.polygon)
}

/** Ray/prism intersection: [tEnter, tExit] or null. */
export function rayPrism(ray: Ray, cell: CellDoc): [number, number] | null {
  let tMin = 0
  let tMax = Number.POSITIVE_INFINITY

  const clip = (denom: number, dist: number): boolean => {
    // half-space: denom * t <= dist
    if (Math.abs(denom) < EPS) return dist >= -EPS
    const t = dist / denom
    if (denom > 0) {
      tMax = Math.min(tMax, t)
    } else {
      tMin = Math.max(tMin, t)
    }
    return tMin <= tMax + EPS
  }

  // z slab
  if (!clip(ray.dir.z, cell.z[1] - ray.origin.z)) return null
  if (!clip(-ray.dir.z, ray.origin.z - cell.z[0])) return null
  // polygon edges: CCW polygon, inward side is the left of each edge
  const n = cell.polygon.length
  for (let i = 0; i < n; i++) {
    const [x0, y0] = cell.polygon[i]
    const [x1, y1] = cell.polygon[(i + 1) % n]
    // outward normal of edge (x0,y0)->(x1,y1)
    const nx = y1 - y0
    const ny = x0 - x1
    const denom = nx * ray.dir.x + ny * ray.dir.y
    const dist = nx * (x0 - ray.origin.x) + ny * (y0 - ray.origin.y)
    if (!clip(denom, dist)) return null
  }
  if (tMax < Math.max(tMin, 0)) return null
  return [Math.max(tMin, 0), tMax]
}

/**
 * Nearest cell whose prism contains the first model-boundary hit,
 * offset slightly inward along the ray. Returns null on a sky click.
 */
export function pickCell(ray: Ray, cells: CellDoc[], boundaryOnly = true): number | null {
  let bestT = Number.POSITIVE_INFINITY
  for (const cell of cells) {
    if (boundaryOnly && cell.label !== null && !cell.label.startsWith('room') && cell.walls.length === 0) {
      // outside cells without wall membership are invisible space
      continue
    }
    const hit = rayPrism(ray, cell)
    if (hit && hit[0] < bestT && hit[0] > EPS) {
      bestT = hit[0]
    }
  }
  if (!Number.isFinite(bestT)) return null
  const probe: Vec3 = {
    x: ray.origin.x + ray.dir.x * (bestT + 1e-6),
    y: ray.origin.y + ray.dir.y * (bestT + 1e-6),
    z: ray.origin.z + ray.dir.z * (bestT + 1e-6),
  }
  for (const cell of cells) {
    if (pointInCell(probe, cell)) return cell.id
  }
  return null
}
