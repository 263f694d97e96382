/** The viewer's single source of truth. Pure data plus actions; no DOM and no
 * rendering here, so the whole flow is testable against a live service. */
import {
  ApiClient,
  GroundResult,
  InstanceRow,
  ScenePayload,
  ViewPayload,
} from "./api.js";

export type DisplayMode = "semantic" | "instance" | "highlight";

export function voxelKey(i: number, j: number, k: number): string {
  return `${i},${j},${k}`;
}

export interface ViewState {
  scene: ScenePayload | null;
  view: ViewPayload | null;
  instances: InstanceRow[];
  brushRadius: number;
  displayMode: DisplayMode;
  /** Last grounding result that carried a selection; the cluster side list
   * renders from this. A no-instance response only raises a toast. */
  lastResult: GroundResult | null;
  /** Voxel keys of the currently highlighted cluster, verbatim from the wire. */
  highlight: Set<string>;
  banner: string | null;
  toast: string | null;
}

function initialState(): ViewState {
  return {
    scene: null,
    view: null,
    instances: [],
    brushRadius: 0,
    displayMode: "semantic",
    lastResult: null,
    highlight: new Set(),
    banner: null,
    toast: null,
  };
}

/** Integer pixels within Euclidean distance r of (u, v), clamped to the
 * image, in row-major order. r = 0 is the single clicked pixel. */
export function discPixels(
  u: number,
  v: number,
  r: number,
  width: number,
  height: number,
): [number, number][] {
  const out: [number, number][] = [];
  const r2 = r * r;
  for (let y = Math.max(0, v - r); y <= Math.min(height - 1, v + r); y++) {
    for (let x = Math.max(0, u - r); x <= Math.min(width - 1, u + r); x++) {
      if ((x - u) * (x - u) + (y - v) * (y - v) <= r2) {
        out.push([x, y]);
      }
    }
  }
  return out;
}

export class ViewStore {
  state: ViewState = initialState();
  private listeners = new Set<() => void>();
  private inflight: AbortController | null = null;

  constructor(readonly api: ApiClient) {}

  subscribe(fn: () => void): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  async loadScene(): Promise<void> {
    try {
      const [scene, view, instances] = await Promise.all([
        this.api.getScene(),
        this.api.getRender(),
        this.api.getInstances(),
      ]);
      this.state = { ...initialState(), scene, view, instances };
    } catch (err) {
      this.state.banner = `scene service unreachable: ${String(err)}`;
    }
    this.notify();
  }

  setBrushRadius(r: number): void {
    if (r < 0 || !Number.isFinite(r)) throw new RangeError(`bad brush radius ${r}`);
    this.state.brushRadius = Math.floor(r);
    this.notify();
  }

  setDisplayMode(mode: DisplayMode): void {
    if (mode === "highlight" && this.state.lastResult === null) {
      return; // highlight mode requires a grounded result
    }
    this.state.displayMode = mode;
    this.notify();
  }

  clearToast(): void {
    this.state.toast = null;
    this.notify();
  }

  /** Ground the brush disc at (u, v). A newer click supersedes a pending one;
   * only the latest response touches the state. */
  async clickToGround(u: number, v: number): Promise<void> {
    const view = this.state.view;
    if (!view) return;
    if (u < 0 || v < 0 || u >= view.width || v >= view.height) {
      throw new RangeError(`pixel (${u}, ${v}) outside ${view.width}x${view.height}`);
    }
    const pixels = discPixels(u, v, this.state.brushRadius, view.width, view.height);
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const result = await this.api.ground(pixels, {}, controller.signal);
      if (this.inflight !== controller) return;
      this.inflight = null;
      if (result.selected === null) {
        this.state.toast = "no instance here";
      } else {
        this.state.toast = null;
        this.state.lastResult = result;
        this.state.highlight = new Set(
          result.selected.voxels.map(([i, j, k]) => voxelKey(i, j, k)),
        );
        this.state.displayMode = "highlight";
      }
      this.notify();
    } catch (err) {
      if (controller.signal.aborted) return; // superseded
      this.inflight = null;
      this.state.banner = `grounding request failed: ${String(err)}`;
      this.notify();
    }
  }

  /** Every highlighted voxel must be an occupied voxel of the scene. */
  highlightWithinScene(): boolean {
    const scene = this.state.scene;
    if (!scene) return this.state.highlight.size === 0;
    const occupied = new Set(scene.voxels.map(([i, j, k]) => voxelKey(i, j, k)));
    for (const key of this.state.highlight) {
      if (!occupied.has(key)) return false;
    }
    return true;
  }
}
