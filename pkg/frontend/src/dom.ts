/** Small DOM components: banner, toast, cluster side list, status line.
 * Row text is built by pure functions so tests can check it without a DOM. */
import { GroundResult } from "./api.js";
import { ViewStore } from "./state.js";

export function clusterRows(result: GroundResult | null): string[] {
  if (!result) return [];
  return result.clusters.map((c) => {
    const mark = result.selected === c ? "▶" : " ";
    return `${mark} ${c.class}: ${c.voxels.length} voxels at ${c.depth.toFixed(2)} m`;
  });
}

export function statusLine(store: ViewStore): string {
  const { scene, brushRadius, displayMode } = store.state;
  const voxels = scene ? scene.voxels.length : 0;
  return `${voxels} occupied voxels | brush ${brushRadius} px | mode ${displayMode}`;
}

export function renderSidebar(el: HTMLElement, store: ViewStore): void {
  el.textContent = "";
  const status = document.createElement("div");
  status.className = "status";
  status.textContent = statusLine(store);
  el.appendChild(status);

  const list = document.createElement("ul");
  list.className = "clusters";
  for (const row of clusterRows(store.state.lastResult)) {
    const li = document.createElement("li");
    li.textContent = row;
    list.appendChild(li);
  }
  el.appendChild(list);
}

export function renderBanner(el: HTMLElement, store: ViewStore, onRetry: () => void): void {
  el.textContent = "";
  const message = store.state.banner;
  el.style.display = message ? "block" : "none";
  if (!message) return;
  const span = document.createElement("span");
  span.textContent = message;
  el.appendChild(span);
  const retry = document.createElement("button");
  retry.textContent = "retry";
  retry.addEventListener("click", onRetry);
  el.appendChild(retry);
}

export function renderToast(el: HTMLElement, store: ViewStore): void {
  const toast = store.state.toast;
  el.style.display = toast ? "block" : "none";
  el.textContent = toast ?? "";
}
