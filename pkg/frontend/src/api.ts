/** Typed client for the scene service wire API. The viewer never computes
 * geometry itself; everything it displays came back from these calls. */

export interface SceneMeta {
  dims: [number, number, number];
  voxel_size: number;
  origin: [number, number, number];
}

/** Occupied voxel row: [i, j, k, classId, instanceId]. */
export type VoxelRow = [number, number, number, number, number];

export interface ScenePayload {
  meta: SceneMeta;
  class_table: string[];
  voxels: VoxelRow[];
}

export interface ViewPayload {
  width: number;
  height: number;
  class: number[];
  instance: number[];
  depth: (number | null)[];
}

export interface InstanceRow {
  id: number;
  class: string;
  center: [number, number, number];
  voxel_count: number;
  depth: number;
}

export interface GroundCluster {
  voxels: [number, number, number][];
  center: [number, number, number];
  class: string;
  depth: number;
}

export interface GroundResult {
  selected: GroundCluster | null;
  clusters: GroundCluster[];
  noise_count: number;
  params: { eps: number; min_pts: number };
}

export interface GroundOptions {
  eps?: number;
  minPts?: number;
  background?: string[];
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.baseUrl + path);
    if (!resp.ok) {
      throw new Error(`GET ${path}: HTTP ${resp.status}`);
    }
    return resp.json() as Promise<T>;
  }

  getScene(): Promise<ScenePayload> {
    return this.getJson("/api/scene");
  }

  getRender(): Promise<ViewPayload> {
    return this.getJson("/api/render");
  }

  getInstances(): Promise<InstanceRow[]> {
    return this.getJson("/api/instances");
  }

  async ground(
    pixels: [number, number][],
    opts: GroundOptions = {},
    signal?: AbortSignal,
  ): Promise<GroundResult> {
    const body: Record<string, unknown> = { pixels };
    if (opts.eps !== undefined) body.eps = opts.eps;
    if (opts.minPts !== undefined) body.min_pts = opts.minPts;
    if (opts.background !== undefined) body.background = opts.background;
    const resp = await fetch(this.baseUrl + "/api/ground", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (!resp.ok) {
      throw new Error(`POST /api/ground: HTTP ${resp.status}`);
    }
    return resp.json() as Promise<GroundResult>;
  }
}
