/** Entry point: wire the store, the two panes, and the controls together. */
import { ApiClient } from "./api.js";
import { renderBanner, renderSidebar, renderToast } from "./dom.js";
import { ImagePane } from "./imagePane.js";
import { DisplayMode, ViewStore } from "./state.js";
import { VoxelPane } from "./voxelPane.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

const apiBase =
  new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8008";
const store = new ViewStore(new ApiClient(apiBase));

new ImagePane(el("image-pane"), store);
new VoxelPane(el("voxel-pane"), store);

const sidebar = el("sidebar");
const banner = el("banner");
const toast = el("toast");
store.subscribe(() => {
  renderSidebar(sidebar, store);
  renderBanner(banner, store, () => void store.loadScene());
  renderToast(toast, store);
  if (store.state.toast) {
    setTimeout(() => store.clearToast(), 2500);
  }
});

for (const mode of ["semantic", "instance", "highlight"] as DisplayMode[]) {
  el(`mode-${mode}`).addEventListener("click", () => store.setDisplayMode(mode));
}
const brush = el("brush") as HTMLInputElement;
brush.addEventListener("input", () => store.setBrushRadius(Number(brush.value)));

void store.loadScene();
