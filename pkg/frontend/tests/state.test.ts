/** Store behavior against a scripted fake service. */
import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, GroundResult } from "../src/api.js";
import { ViewStore, discPixels, voxelKey } from "../src/state.js";

const SCENE = {
  meta: { dims: [4, 4, 2] as [number, number, number], voxel_size: 1, origin: [0, 0, 0] as [number, number, number] },
  class_table: ["empty", "ceiling", "floor", "wall", "chair"],
  voxels: [
    [1, 1, 0, 4, 1],
    [1, 2, 0, 4, 1],
    [3, 3, 0, 3, 0],
  ] as [number, number, number, number, number][],
};

const VIEW = {
  width: 2,
  height: 2,
  class: [4, 0, 3, 0],
  instance: [1, 0, 0, 0],
  depth: [1.5, null, 2.5, null],
};

const HIT: GroundResult = {
  selected: { voxels: [[1, 1, 0], [1, 2, 0]], center: [1, 1.5, 0], class: "chair", depth: 1.4 },
  clusters: [
    { voxels: [[1, 1, 0], [1, 2, 0]], center: [1, 1.5, 0], class: "chair", depth: 1.4 },
  ],
  noise_count: 0,
  params: { eps: 1.5, min_pts: 4 },
};
HIT.selected = HIT.clusters[0]!;

const MISS: GroundResult = { selected: null, clusters: [], noise_count: 0, params: { eps: 1.5, min_pts: 4 } };

function fakeFetch(groundResponder: (body: any) => GroundResult) {
  return vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
    const path = String(url);
    const ok = (payload: unknown) =>
      new Response(JSON.stringify(payload), { status: 200 });
    if (path.endsWith("/api/scene")) return ok(SCENE);
    if (path.endsWith("/api/render")) return ok(VIEW);
    if (path.endsWith("/api/instances")) return ok([]);
    if (path.endsWith("/api/ground")) {
      if (init?.signal?.aborted) throw new DOMException("aborted", "AbortError");
      return ok(groundResponder(JSON.parse(String(init?.body))));
    }
    return new Response("not found", { status: 404 });
  });
}

afterEach(() => vi.unstubAllGlobals());

async function loadedStore(responder: (body: any) => GroundResult): Promise<ViewStore> {
  vi.stubGlobal("fetch", fakeFetch(responder));
  const store = new ViewStore(new ApiClient("http://test"));
  await store.loadScene();
  return store;
}

describe("loadScene", () => {
  it("fills scene, view, and clears the banner", async () => {
    const store = await loadedStore(() => HIT);
    expect(store.state.scene?.voxels.length).toBe(3);
    expect(store.state.view?.width).toBe(2);
    expect(store.state.banner).toBeNull();
  });

  it("raises a banner when the service is unreachable", async () => {
    vi.stubGlobal("fetch", vi.fn(async () => { throw new TypeError("ECONNREFUSED"); }));
    const store = new ViewStore(new ApiClient("http://nowhere"));
    await store.loadScene();
    expect(store.state.banner).toMatch(/unreachable/);
    expect(store.state.scene).toBeNull();
  });
});

describe("clickToGround", () => {
  it("highlights exactly the selected voxels and switches to highlight mode", async () => {
    const store = await loadedStore(() => HIT);
    await store.clickToGround(0, 0);
    expect(store.state.displayMode).toBe("highlight");
    expect(store.state.highlight).toEqual(new Set([voxelKey(1, 1, 0), voxelKey(1, 2, 0)]));
    expect(store.state.lastResult).toEqual(HIT);
    expect(store.highlightWithinScene()).toBe(true);
  });

  it("no-instance responses raise a toast and leave the highlight alone", async () => {
    let miss = false;
    const store = await loadedStore(() => (miss ? MISS : HIT));
    await store.clickToGround(0, 0);
    const before = new Set(store.state.highlight);
    miss = true;
    await store.clickToGround(1, 1);
    expect(store.state.toast).toBe("no instance here");
    expect(store.state.highlight).toEqual(before);
    expect(store.state.displayMode).toBe("highlight");
    expect(store.state.lastResult).toEqual(HIT);
  });

  it("sends the disc of pixels for a nonzero brush radius", async () => {
    let seen: [number, number][] = [];
    const store = await loadedStore((body) => {
      seen = body.pixels;
      return HIT;
    });
    store.setBrushRadius(1);
    await store.clickToGround(1, 1);
    expect(seen).toEqual([[1, 0], [0, 1], [1, 1]]);
  });

  it("rejects clicks outside the image", async () => {
    const store = await loadedStore(() => HIT);
    await expect(store.clickToGround(5, 0)).rejects.toThrow(RangeError);
  });

  it("wire failures raise the banner and keep the rest of the state", async () => {
    let fail = false;
    const store = await loadedStore(() => HIT);
    await store.clickToGround(0, 0);
    const highlight = new Set(store.state.highlight);
    vi.stubGlobal("fetch", vi.fn(async () => { throw new TypeError("boom"); }));
    fail = true;
    await store.clickToGround(1, 0);
    expect(store.state.banner).toMatch(/grounding request failed/);
    expect(store.state.highlight).toEqual(highlight);
  });

  it("re-clicking the same pixel reproduces the identical highlight", async () => {
    const store = await loadedStore(() => HIT);
    await store.clickToGround(0, 0);
    const first = new Set(store.state.highlight);
    await store.clickToGround(0, 0);
    expect(store.state.highlight).toEqual(first);
  });
});

describe("display mode guard", () => {
  it("refuses highlight mode before any grounding result exists", async () => {
    const store = await loadedStore(() => HIT);
    store.setDisplayMode("highlight");
    expect(store.state.displayMode).toBe("semantic");
    store.setDisplayMode("instance");
    expect(store.state.displayMode).toBe("instance");
  });
});

describe("discPixels", () => {
  it("radius zero is the single pixel", () => {
    expect(discPixels(3, 4, 0, 10, 10)).toEqual([[3, 4]]);
  });

  it("clamps to the image bounds", () => {
    const pixels = discPixels(0, 0, 2, 10, 10);
    expect(pixels.every(([x, y]) => x >= 0 && y >= 0)).toBe(true);
    expect(pixels).toContainEqual([0, 0]);
    expect(pixels).toContainEqual([2, 0]);
  });

  it("keeps only pixels within the euclidean radius", () => {
    const pixels = discPixels(5, 5, 2, 10, 10);
    expect(pixels).not.toContainEqual([3, 3]);
    expect(pixels).toContainEqual([4, 4]);
    expect(pixels.length).toBe(13);
  });
});
