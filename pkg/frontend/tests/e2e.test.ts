/** End-to-end: scripted clicks against a real served scene bundle.
 *
 * Spawns the scene service on a freshly synthesized seed-7 bundle, then
 * drives the store exactly as mouse clicks would and asserts the highlighted
 * voxel set equals what the service returned.
 */
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ViewStore, discPixels, voxelKey } from "../src/state.js";

const PORT = 8791;
const BASE = `http://127.0.0.1:${PORT}`;

let workdir: string;
let server: ChildProcess | null = null;

async function serviceUp(): Promise<boolean> {
  try {
    const resp = await fetch(`${BASE}/api/scene`);
    return resp.ok;
  } catch {
    return false;
  }
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "og-viewer-e2e-"));
  const bundle = join(workdir, "seed7");
  const synth = spawnSync(
    "python3",
    ["-m", "occuground.cli", "synth", "--seed", "7", "--objects", "3", "--out", bundle],
    { encoding: "utf-8" },
  );
  if (synth.status !== 0) {
    throw new Error(`scene synthesis failed: ${synth.stderr}`);
  }
  server = spawn(
    "python3",
    ["-m", "occuground.cli", "serve", "--scene", bundle, "--port", String(PORT)],
    { stdio: "ignore" },
  );
  for (let tries = 0; tries < 100; tries++) {
    if (await serviceUp()) return;
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error("scene service did not come up");
}, 60_000);

afterAll(() => {
  server?.kill();
  rmSync(workdir, { recursive: true, force: true });
});

/** A pixel near the center of the instance's silhouette; a rim pixel's ray
 * can clip just a corner of the box, which is legitimately too sparse to
 * cluster. Clicking mid-mask is what a user aiming at a box does. */
function centralPixelOf(store: ViewStore, instanceId: number): [number, number] {
  const view = store.state.view!;
  const members: [number, number][] = [];
  for (let v = 0; v < view.height; v++) {
    for (let u = 0; u < view.width; u++) {
      if (view.instance[v * view.width + u] === instanceId) members.push([u, v]);
    }
  }
  if (members.length === 0) throw new Error(`instance ${instanceId} not visible`);
  const cu = members.reduce((s, [u]) => s + u, 0) / members.length;
  const cv = members.reduce((s, [, v]) => s + v, 0) / members.length;
  let best = members[0]!;
  let bestD = Infinity;
  for (const [u, v] of members) {
    const d = (u - cu) * (u - cu) + (v - cv) * (v - cv);
    if (d < bestD) {
      bestD = d;
      best = [u, v];
    }
  }
  return best;
}

function wallPixel(store: ViewStore): [number, number] {
  const view = store.state.view!;
  const scene = store.state.scene!;
  const wall = scene.class_table.indexOf("wall");
  for (let v = 0; v < view.height; v++) {
    for (let u = 0; u < view.width; u++) {
      const at = v * view.width + u;
      if (view.class[at] === wall && view.instance[at] === 0) return [u, v];
    }
  }
  throw new Error("no wall pixel visible");
}

describe("viewer against a live scene service", () => {
  it("loads the scene and mirrors the service's voxel count", async () => {
    const store = new ViewStore(new ApiClient(BASE));
    await store.loadScene();
    expect(store.state.banner).toBeNull();
    const direct = await new ApiClient(BASE).getScene();
    expect(store.state.scene!.voxels.length).toBe(direct.voxels.length);
    expect(store.state.instances.length).toBeGreaterThan(0);
  });

  it("click on each visible box highlights exactly the service-returned voxels", async () => {
    const store = new ViewStore(new ApiClient(BASE));
    await store.loadScene();
    store.setBrushRadius(1);
    const api = new ApiClient(BASE);
    const view = store.state.view!;
    const visible = new Set(view.instance.filter((i) => i !== 0));
    expect(visible.size).toBeGreaterThan(0);
    for (const instanceId of [...visible].sort((a, b) => a - b)) {
      const [u, v] = centralPixelOf(store, instanceId);
      await store.clickToGround(u, v);
      const direct = await api.ground(discPixels(u, v, 1, view.width, view.height));
      expect(direct.selected).not.toBeNull();
      const wanted = new Set(direct.selected!.voxels.map(([i, j, k]) => voxelKey(i, j, k)));
      expect(store.state.highlight).toEqual(wanted);
      expect(store.state.displayMode).toBe("highlight");
      expect(store.highlightWithinScene()).toBe(true);
      expect(store.state.lastResult!.clusters.length).toBeGreaterThan(0);
    }
  });

  it("a wall click raises the no-instance toast and changes nothing else", async () => {
    const store = new ViewStore(new ApiClient(BASE));
    await store.loadScene();
    store.setBrushRadius(1);
    const [bu, bv] = centralPixelOf(store, 1);
    await store.clickToGround(bu, bv);
    const highlightBefore = new Set(store.state.highlight);
    const resultBefore = store.state.lastResult;
    const modeBefore = store.state.displayMode;

    const [wu, wv] = wallPixel(store);
    await store.clickToGround(wu, wv);
    expect(store.state.toast).toBe("no instance here");
    expect(store.state.highlight).toEqual(highlightBefore);
    expect(store.state.lastResult).toBe(resultBefore);
    expect(store.state.displayMode).toBe(modeBefore);
  });

  it("re-clicking the same pixel yields the identical highlight", async () => {
    const store = new ViewStore(new ApiClient(BASE));
    await store.loadScene();
    store.setBrushRadius(1);
    const [u, v] = centralPixelOf(store, 1);
    await store.clickToGround(u, v);
    const first = new Set(store.state.highlight);
    await store.clickToGround(u, v);
    expect(store.state.highlight).toEqual(first);
  });

  it("a newer click supersedes a pending one", async () => {
    const store = new ViewStore(new ApiClient(BASE));
    await store.loadScene();
    const ids = [...new Set(store.state.view!.instance.filter((i) => i !== 0))].sort(
      (a, b) => a - b,
    );
    expect(ids.length).toBeGreaterThan(1);
    store.setBrushRadius(1);
    const view = store.state.view!;
    const [u1, v1] = centralPixelOf(store, ids[0]!);
    const [u2, v2] = centralPixelOf(store, ids[1]!);
    const racing = store.clickToGround(u1, v1);
    await store.clickToGround(u2, v2);
    await racing;
    const direct = await new ApiClient(BASE).ground(discPixels(u2, v2, 1, view.width, view.height));
    const wanted = new Set(direct.selected!.voxels.map(([i, j, k]) => voxelKey(i, j, k)));
    expect(store.state.highlight).toEqual(wanted);
  });
});
