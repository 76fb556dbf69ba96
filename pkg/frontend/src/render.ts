// Rendering: an orthographic top-down plan view (canvas 2D) used for
// picking and wall drawing, and a minimal WebGL mesh view for inspection.

import { CellDoc, ModelDoc, Vec3 } from './types.js'

const ROOM_COLORS = ['#4e9a06', '#3465a4', '#c4a000', '#75507b', '#cc0000', '#06989a']

export interface PlanTransform {
  scale: number
  offsetX: number
  offsetY: number
}

export function fitPlan(cells: CellDoc[], width: number, height: number): PlanTransform {
  let minX = Infinity
  let minY = Infinity
  let maxX = -Infinity
  let maxY = -Infinity
  for (const cell of cells) {
    for (const [x, y] of cell.polygon) {
      minX = Math.min(minX, x)
      minY = Math.min(minY, y)
      maxX = Math.max(maxX, x)
      maxY = Math.max(maxY, y)
    }
  }
  if (!Number.isFinite(minX)) return { scale: 1, offsetX: 0, offsetY: 0 }
  const scale = 0.92 * Math.min(width / (maxX - minX), height / (maxY - minY))
  return {
    scale,
    offsetX: width / 2 - scale * (minX + maxX) / 2,
    offsetY: height / 2 + scale * (minY + maxY) / 2,
  }
}

export function worldToScreen(t: PlanTransform, x: number, y: number): [number, number] {
  return [t.offsetX + t.scale * x, t.offsetY - t.scale * y]
}

export function screenToWorld(t: PlanTransform, px: number, py: number): [number, number] {
  return [(px - t.offsetX) / t.scale, (t.offsetY - py) / t.scale]
}

export interface PlanOptions {
  story: [number, number] | null
  showWalls: boolean
  selection: number | null
}

export function drawPlan(
  ctx: CanvasRenderingContext2D,
  cells: CellDoc[],
  model: ModelDoc | null,
  t: PlanTransform,
  opts: PlanOptions,
): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height)
  const inStory = (cell: CellDoc) =>
    opts.story === null || (cell.z[0] < opts.story[1] && cell.z[1] > opts.story[0])
  for (const cell of cells) {
    if (!inStory(cell)) continue
    let fill = 'rgba(220,220,220,0.25)'
    if (cell.label && cell.label.startsWith('room_')) {
      const idx = parseInt(cell.label.slice(5), 10)
      fill = ROOM_COLORS[idx % ROOM_COLORS.length] + '66'
    }
    ctx.beginPath()
    cell.polygon.forEach(([x, y], i) => {
      const [sx, sy] = worldToScreen(t, x, y)
      if (i === 0) ctx.moveTo(sx, sy)
      else ctx.lineTo(sx, sy)
    })
    ctx.closePath()
    ctx.fillStyle = fill
    ctx.fill()
    if (cell.id === opts.selection) {
      ctx.lineWidth = 2
      ctx.strokeStyle = '#ef2929'
      ctx.stroke()
    }
  }
  if (model && opts.showWalls) {
    ctx.lineWidth = 1.5
    ctx.strokeStyle = '#2e3436'
    for (const wall of model.walls) {
      if (wall.kind !== 'wall') continue
      for (const cellId of wall.cells) {
        const cell = cells.find((c) => c.id === cellId)
        if (!cell || !inStory(cell)) continue
        ctx.beginPath()
        cell.polygon.forEach(([x, y], i) => {
          const [sx, sy] = worldToScreen(t, x, y)
          if (i === 0) ctx.moveTo(sx, sy)
          else ctx.lineTo(sx, sy)
        })
        ctx.closePath()
        ctx.fillStyle = 'rgba(46,52,54,0.8)'
        ctx.fill()
      }
    }
  }
}

// --------------------------------------------------------------------------
// WebGL mesh view

const VERT_SRC = `
attribute vec3 pos;
attribute vec3 nrm;
uniform mat4 mvp;
varying float shade;
void main() {
  gl_Position = mvp * vec4(pos, 1.0);
  shade = 0.4 + 0.6 * abs(dot(normalize(nrm), normalize(vec3(0.5, 0.3, 1.0))));
}
`

const FRAG_SRC = `
precision mediump float;
uniform vec4 color;
varying float shade;
void main() { gl_FragColor = vec4(color.rgb * shade, color.a); }
`

export interface MeshBuffer {
  entity: string
  triangles: Float32Array // count * 9
  color: [number, number, number, number]
}

export class MeshView {
  private gl: WebGLRenderingContext
  private program: WebGLProgram
  private buffers: { vbo: WebGLBuffer; nbo: WebGLBuffer; count: number; color: number[] }[] = []
  yaw = 0.8
  pitch = 0.9
  distance = 18
  center: Vec3 = { x: 4, y: 2.5, z: 1.3 }

  constructor(canvas: HTMLCanvasElement) {
    const gl = canvas.getContext('webgl')
    if (!gl) throw new Error('WebGL unavailable')
    this.gl = gl
    this.program = this.compile()
  }

  private compile(): WebGLProgram {
    const gl = this.gl
    const mk = (type: number, src: string) => {
      const sh = gl.createShader(type)!
      gl.shaderSource(sh, src)
      gl.compileShader(sh)
      if (!gl.getShaderParameter(sh, gl.COMPILE_STATUS)) {
        throw new Error(gl.getShaderInfoLog(sh) ?? 'shader error')
      }
      return sh
    }
    const program = gl.createProgram()!
    gl.attachShader(program, mk(gl.VERTEX_SHADER, VERT_SRC))
    gl.attachShader(program, mk(gl.FRAGMENT_SHADER, FRAG_SRC))
    gl.linkProgram(program)
    return program
  }

  setMeshes(meshes: MeshBuffer[]): void {
    const gl = this.gl
    this.buffers = []
    for (const mesh of meshes) {
      const nTri = mesh.triangles.length / 9
      const normals = new Float32Array(mesh.triangles.length)
      for (let t = 0; t < nTri; t++) {
        const o = t * 9
        const ax = mesh.triangles[o + 3] - mesh.triangles[o]
        const ay = mesh.triangles[o + 4] - mesh.triangles[o + 1]
        const az = mesh.triangles[o + 5] - mesh.triangles[o + 2]
        const bx = mesh.triangles[o + 6] - mesh.triangles[o]
        const by = mesh.triangles[o + 7] - mesh.triangles[o + 1]
        const bz = mesh.triangles[o + 8] - mesh.triangles[o + 2]
        const nx = ay * bz - az * by
        const ny = az * bx - ax * bz
        const nz = ax * by - ay * bx
        for (let v = 0; v < 3; v++) {
          normals[o + 3 * v] = nx
          normals[o + 3 * v + 1] = ny
          normals[o + 3 * v + 2] = nz
        }
      }
      const vbo = gl.createBuffer()!
      gl.bindBuffer(gl.ARRAY_BUFFER, vbo)
      gl.bufferData(gl.ARRAY_BUFFER, mesh.triangles, gl.STATIC_DRAW)
      const nbo = gl.createBuffer()!
      gl.bindBuffer(gl.ARRAY_BUFFER, nbo)
      gl.bufferData(gl.ARRAY_BUFFER, normals, gl.STATIC_DRAW)
      this.buffers.push({ vbo, nbo, count: nTri * 3, color: mesh.color })
    }
  }

  draw(): void {
    const gl = this.gl
    const canvas = gl.canvas as HTMLCanvasElement
    gl.viewport(0, 0, canvas.width, canvas.height)
    gl.enable(gl.DEPTH_TEST)
    gl.clearColor(0.96, 0.96, 0.95, 1)
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT)
    gl.useProgram(this.program)
    const mvp = this.mvpMatrix(canvas.width / canvas.height)
    const loc = gl.getUniformLocation(this.program, 'mvp')
    gl.uniformMatrix4fv(loc, false, mvp)
    const colorLoc = gl.getUniformLocation(this.program, 'color')
    const posLoc = gl.getAttribLocation(this.program, 'pos')
    const nrmLoc = gl.getAttribLocation(this.program, 'nrm')
    for (const buf of this.buffers) {
      gl.uniform4fv(colorLoc, buf.color)
      gl.bindBuffer(gl.ARRAY_BUFFER, buf.vbo)
      gl.enableVertexAttribArray(posLoc)
      gl.vertexAttribPointer(posLoc, 3, gl.FLOAT, false, 0, 0)
      gl.bindBuffer(gl.ARRAY_BUFFER, buf.nbo)
      gl.enableVertexAttribArray(nrmLoc)
      gl.vertexAttribPointer(nrmLoc, 3, gl.FLOAT, false, 0, 0)
      gl.drawArrays(gl.TRIANGLES, 0, buf.count)
    }
  }

  /** Camera ray through a canvas pixel (for picking). */
  pixelRay(px: number, py: number, width: number, height: number): { origin: Vec3; dir: Vec3 } {
    const eye = this.eye()
    const fwd = norm3(sub3(this.center, eye))
    const right = norm3(cross3(fwd, { x: 0, y: 0, z: 1 }))
    const up = cross3(right, fwd)
    const fov = Math.PI / 4
    const ndcX = (2 * px / width - 1) * Math.tan(fov / 2) * (width / height)
    const ndcY = (1 - 2 * py / height) * Math.tan(fov / 2)
    const dir = norm3(add3(add3(fwd, scale3(right, ndcX)), scale3(up, ndcY)))
    return { origin: eye, dir }
  }

  private eye(): Vec3 {
    return {
      x: this.center.x + this.distance * Math.cos(this.pitch) * Math.cos(this.yaw),
      y: this.center.y + this.distance * Math.cos(this.pitch) * Math.sin(this.yaw),
      z: this.center.z + this.distance * Math.sin(this.pitch),
    }
  }

  private mvpMatrix(aspect: number): Float32Array {
    const eye = this.eye()
    const view = lookAt(eye, this.center, { x: 0, y: 0, z: 1 })
    const proj = perspective(Math.PI / 4, aspect, 0.1, 200)
    return mat4mul(proj, view)
  }
}

// small vector/matrix helpers (column-major mat4)

function sub3(a: Vec3, b: Vec3): Vec3 { return { x: a.x - b.x, y: a.y - b.y, z: a.z - b.z } }
function add3(a: Vec3, b: Vec3): Vec3 { return { x: a.x + b.x, y: a.y + b.y, z: a.z + b.z } }
function scale3(a: Vec3, s: number): Vec3 { return { x: a.x * s, y: a.y * s, z: a.z * s } }
function cross3(a: Vec3, b: Vec3): Vec3 {
  return { x: a.y * b.z - a.z * b.y, y: a.z * b.x - a.x * b.z, z: a.x * b.y - a.y * b.x }
}
function norm3(a: Vec3): Vec3 {
  const l = Math.hypot(a.x, a.y, a.z) || 1
  return scale3(a, 1 / l)
}

function lookAt(eye: Vec3, center: Vec3, up: Vec3): Float32Array {
  const f = norm3(sub3(center, eye))
  const s = norm3(cross3(f, up))
  const u = cross3(s, f)
  return new Float32Array([
    s.x, u.x, -f.x, 0,
    s.y, u.y, -f.y, 0,
    s.z, u.z, -f.z, 0,
    -(s.x * eye.x + s.y * eye.y + s.z * eye.z),
    -(u.x * eye.x + u.y * eye.y + u.z * eye.z),
    f.x * eye.x + f.y * eye.y + f.z * eye.z,
    1,
  ])
}

function perspective(fovY: number, aspect: number, near: number, far: number): Float32Array {
  const f = 1 / Math.tan(fovY / 2)
  return new Float32Array([
    f / aspect, 0, 0, 0,
    0, f, 0, 0,
    0, 0, (far + near) / (near - far), -1,
    0, 0, (2 * far * near) / (near - far), 0,
  ])
}

function mat4mul(a: Float32Array, b: Float32Array): Float32Array {
  const out = new Float32Array(16)
  for (let col = 0; col < 4; col++) {
    for (let row = 0; row < 4; row++) {
      let sum = 0
      for (let k = 0; k < 4; k++) sum += a[k * 4 + row] * b[col * 4 + k]
      out[col * 4 + row] = sum
    }
  }
  return out
}
