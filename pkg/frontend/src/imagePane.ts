/** Left pane: the rendered scene image on a 2D canvas. Clicking a pixel asks
 * the store to ground it. */
import { classColor, instanceColor, MISS_COLOR } from "./palette.js";
import { ViewStore } from "./state.js";

const SCALE = 4;

export class ImagePane {
  private canvas: HTMLCanvasElement;

  constructor(container: HTMLElement, private store: ViewStore) {
    this.canvas = document.createElement("canvas");
    this.canvas.style.imageRendering = "pixelated";
    this.canvas.style.cursor = "crosshair";
    container.appendChild(this.canvas);
    this.canvas.addEventListener("click", (ev) => {
      const view = this.store.state.view;
      if (!view) return;
      const rect = this.canvas.getBoundingClientRect();
      const u = Math.floor(((ev.clientX - rect.left) / rect.width) * view.width);
      const v = Math.floor(((ev.clientY - rect.top) / rect.height) * view.height);
      if (u >= 0 && v >= 0 && u < view.width && v < view.height) {
        void this.store.clickToGround(u, v);
      }
    });
    store.subscribe(() => this.draw());
  }

  draw(): void {
    const view = this.store.state.view;
    if (!view) return;
    this.canvas.width = view.width * SCALE;
    this.canvas.height = view.height * SCALE;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const byInstance = this.store.state.displayMode !== "semantic";
    for (let v = 0; v < view.height; v++) {
      for (let u = 0; u < view.width; u++) {
        const at = v * view.width + u;
        const cls = view.class[at] ?? 0;
        const inst = view.instance[at] ?? 0;
        let color: string;
        if (cls === 0) {
          color = MISS_COLOR;
        } else if (byInstance) {
          color = inst === 0 ? "#3a3a3a" : instanceColor(inst);
        } else {
          color = classColor(cls);
        }
        ctx.fillStyle = color;
        ctx.fillRect(u * SCALE, v * SCALE, SCALE, SCALE);
      }
    }
  }
}
