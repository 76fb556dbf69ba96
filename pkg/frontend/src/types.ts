// Shared data shapes of the reconstruction service API.

export interface RoomDoc {
  id: number
  volume: number
  cells: number[]
  boundary_polygons: number[][][]
}

export interface WallSurfaceDoc {
  normal: number[]
  offset: number
  virtual: boolean
}

export interface WallDoc {
  id: number
  kind: 'wall' | 'slab'
  axis: number[]
  thickness: number
  surfaces: WallSurfaceDoc[]
  cells: number[]
}

export interface ModelDoc {
  schema_version: number
  rooms: RoomDoc[]
  walls: WallDoc[]
  intersections: { cell: number; walls: number[] }[]
  adjacency: (string | number)[][]
  warnings: string[]
}

export interface CellDoc {
  id: number
  polygon: number[][]
  z: [number, number]
  volume: number
  walls: number[]
  label: string | null
}

export interface SolveStatus {
  version: number
  state: 'idle' | 'solving' | 'done' | 'failed'
  job: number | null
  gap?: number
  objective?: number
  error?: string
}

export interface ConstraintRequest {
  kind: 'force_room' | 'force_outside' | 'force_wall' | 'forbid_wall'
  cell: number
  room?: number
  wall?: number
}

export interface VirtualWallRequest {
  p0: [number, number]
  p1: [number, number]
  thickness: number
  z_lo: number
  z_hi: number
}

export interface Vec3 {
  x: number
  y: number
  z: number
}
