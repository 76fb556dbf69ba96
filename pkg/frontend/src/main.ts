// Application wiring: plan view for picking and wall drawing, 3D view
// for inspection, constraint palette and the solve button.

import { HttpApiClient } from './api.js'
import { pickCell } from './pick.js'
import { drawPlan, fitPlan, MeshView, screenToWorld } from './render.js'
import { strokeToRequest, StrokeValidationError } from './snap.js'
import { ViewerState } from './state.js'

const ROOM_COLORS: [number, number, number, number][] = [
  [0.31, 0.6, 0.02, 1], [0.2, 0.4, 0.64, 1], [0.77, 0.63, 0.0, 1],
  [0.46, 0.31, 0.48, 1], [0.8, 0.0, 0.0, 1], [0.02, 0.6, 0.6, 1],
]

type Tool = 'select' | 'force_outside' | 'force_room' | 'force_wall' | 'forbid_wall' | 'draw_wall'

function toast(message: string): void {
  const el = document.getElementById('status')
  if (el) el.textContent = message
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search)
  const base = params.get('api') ?? 'http://127.0.0.1:8472'
  const api = new HttpApiClient(base)
  const state = new ViewerState(api)

  const planCanvas = document.getElementById('plan') as HTMLCanvasElement
  const meshCanvas = document.getElementById('view3d') as HTMLCanvasElement
  const solveButton = document.getElementById('solve') as HTMLButtonElement
  const alphaInput = document.getElementById('alpha') as HTMLInputElement
  const storySelect = document.getElementById('story') as HTMLSelectElement
  const toolSelect = document.getElementById('tool') as HTMLSelectElement
  const diffButton = document.getElementById('diff') as HTMLButtonElement

  let meshView: MeshView | null = null
  try {
    meshView = new MeshView(meshCanvas)
  } catch {
    toast('WebGL unavailable; plan view only')
  }

  let stroke: [number, number] | null = null

  const storyBounds = (): { z_lo: number; z_hi: number } => {
    const stories = storyIntervals()
    const idx = parseInt(storySelect.value || '0', 10)
    const s = stories[Math.min(idx, stories.length - 1)] ?? [0, 3]
    return { z_lo: s[0], z_hi: s[1] }
  }

  const storyIntervals = (): [number, number][] => {
    const zs = new Set<number>()
    for (const cell of state.cells) {
      zs.add(cell.z[0])
      zs.add(cell.z[1])
    }
    const sorted = [...zs].sort((a, b) => a - b)
    const out: [number, number][] = []
    for (let i = 0; i + 1 < sorted.length; i++) out.push([sorted[i], sorted[i + 1]])
    return out
  }

  const redraw = (): void => {
    const t = fitPlan(state.cells, planCanvas.width, planCanvas.height)
    const stories = storyIntervals()
    while (storySelect.options.length < stories.length) {
      const opt = document.createElement('option')
      opt.value = String(storySelect.options.length)
      opt.textContent = `story ${storySelect.options.length}`
      storySelect.appendChild(opt)
    }
    const idx = parseInt(storySelect.value || '0', 10)
    drawPlan(planCanvas.getContext('2d')!, state.cells, state.model, t, {
      story: stories[idx] ?? null,
      showWalls: state.show.walls,
      selection: state.selection?.kind === 'cell' ? state.selection.id : null,
    })
    solveButton.disabled = !state.canSolve
    toast(state.statusMessage)
    void refreshMeshes()
  }

  const refreshMeshes = async (): Promise<void> => {
    if (!meshView || !state.model) return
    const meshes = []
    if (state.show.rooms) {
      for (const room of state.model.rooms) {
        meshes.push({
          entity: `room_${room.id}`,
          triangles: await api.getMeshBinary(`room_${room.id}`),
          color: ROOM_COLORS[room.id % ROOM_COLORS.length],
        })
      }
    }
    if (state.show.walls) {
      for (const wall of state.model.walls) {
        meshes.push({
          entity: `wall_${wall.id}`,
          triangles: await api.getMeshBinary(`wall_${wall.id}`),
          color: [0.35, 0.35, 0.38, 1] as [number, number, number, number],
        })
      }
    }
    meshView.setMeshes(meshes)
    meshView.draw()
  }

  state.onChange(redraw)

  planCanvas.addEventListener('mousedown', (ev) => {
    const t = fitPlan(state.cells, planCanvas.width, planCanvas.height)
    const world = screenToWorld(t, ev.offsetX, ev.offsetY)
    const tool = toolSelect.value as Tool
    if (tool === 'draw_wall') {
      stroke = world
      return
    }
    const bounds = storyBounds()
    const zMid = (bounds.z_lo + bounds.z_hi) / 2
    const hit = pickCell(
      { origin: { x: world[0], y: world[1], z: 100 }, dir: { x: 0, y: 0, z: -1 } },
      state.cells.filter((c) => c.z[0] <= zMid && zMid <= c.z[1]),
      false,
    )
    if (hit === null) {
      toast('no cell under cursor')
      return
    }
    state.select({ kind: 'cell', id: hit })
    if (tool !== 'select') {
      const cell = state.cells.find((c) => c.id === hit)!
      if (tool === 'force_wall' || tool === 'forbid_wall') {
        if (cell.walls.length === 0) {
          toast('cell lies in no wall candidate')
          return
        }
        state.addPendingEdit({ kind: tool, cell: hit, wall: cell.walls[0] })
      } else {
        state.addPendingEdit({ kind: tool, cell: hit })
      }
      toast(`${tool} on cell ${hit} (pending)`)
    }
  })

  planCanvas.addEventListener('mouseup', async (ev) => {
    if (toolSelect.value !== 'draw_wall' || stroke === null) return
    const t = fitPlan(state.cells, planCanvas.width, planCanvas.height)
    const end = screenToWorld(t, ev.offsetX, ev.offsetY)
    const start = stroke
    stroke = null
    try {
      const req = strokeToRequest(start, end, state.model, storyBounds(), 0.2)
      const wall = await api.postVirtualWall(req)
      toast(`virtual wall ${wall} added; re-solve to apply`)
      state.cells = await api.getCells()
      redraw()
    } catch (err) {
      if (err instanceof StrokeValidationError) {
        toast(err.message)
      } else {
        toast(`wall rejected: ${(err as Error).message}; retry when idle`)
      }
    }
  })

  meshCanvas.addEventListener('mousemove', (ev) => {
    if (!meshView || ev.buttons !== 1) return
    meshView.yaw -= ev.movementX * 0.01
    meshView.pitch = Math.min(1.5, Math.max(0.05, meshView.pitch + ev.movementY * 0.01))
    meshView.draw()
  })
  meshCanvas.addEventListener('wheel', (ev) => {
    if (!meshView) return
    meshView.distance = Math.min(80, Math.max(3, meshView.distance * (1 + ev.deltaY * 0.001)))
    meshView.draw()
    ev.preventDefault()
  })

  solveButton.addEventListener('click', () => {
    state.alpha = parseFloat(alphaInput.value)
    void state.requestSolve()
  })
  diffButton.addEventListener('click', () => state.toggleBeforeAfter())
  storySelect.addEventListener('change', redraw)

  try {
    await state.refreshModel()
    toast('model loaded')
  } catch (err) {
    toast(`no solved model yet: ${(err as Error).message}`)
    state.cells = await api.getCells()
    redraw()
  }
}

if (typeof document !== 'undefined') {
  void boot()
}
