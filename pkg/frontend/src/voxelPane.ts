/** Right pane: all occupied voxels as instanced unit cubes with orbit/zoom.
 * The scene is immutable; only per-cube colors change with the display mode.
 * In highlight mode the selected cluster keeps color, other instances go
 * gray, background stays dimmed. */
import * as THREE from "three";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";

import {
  BACKGROUND_DIM,
  HIGHLIGHT_COLOR,
  OTHER_INSTANCE_GRAY,
  classColor,
  instanceColor,
} from "./palette.js";
import { ViewStore, voxelKey } from "./state.js";

export class VoxelPane {
  private renderer: THREE.WebGLRenderer;
  private scene3 = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private controls: OrbitControls;
  private mesh: THREE.InstancedMesh | null = null;
  private backgroundIds = new Set<number>();

  constructor(container: HTMLElement, private store: ViewStore) {
    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    this.renderer.setSize(container.clientWidth || 640, container.clientHeight || 480);
    container.appendChild(this.renderer.domElement);
    this.camera = new THREE.PerspectiveCamera(50, 4 / 3, 0.1, 2000);
    this.camera.up.set(0, 0, 1);
    this.controls = new OrbitControls(this.camera, this.renderer.domElement);
    this.controls.enablePan = false;
    this.scene3.background = new THREE.Color("#14141c");
    this.scene3.add(new THREE.AmbientLight(0xffffff, 0.75));
    const sun = new THREE.DirectionalLight(0xffffff, 1.2);
    sun.position.set(1, 0.5, 2);
    this.scene3.add(sun);

    store.subscribe(() => this.sync());
    const loop = () => {
      requestAnimationFrame(loop);
      this.controls.update();
      this.renderer.render(this.scene3, this.camera);
    };
    loop();
  }

  private rebuildMesh(): void {
    const scene = this.store.state.scene;
    if (!scene) return;
    if (this.mesh) {
      this.scene3.remove(this.mesh);
      this.mesh.dispose();
    }
    this.backgroundIds = new Set(
      ["ceiling", "floor", "wall"]
        .map((n) => scene.class_table.indexOf(n))
        .filter((i) => i >= 0),
    );
    const count = scene.voxels.length;
    const geometry = new THREE.BoxGeometry(1, 1, 1);
    const material = new THREE.MeshLambertMaterial();
    this.mesh = new THREE.InstancedMesh(geometry, material, count);
    const m = new THREE.Matrix4();
    for (let n = 0; n < count; n++) {
      const [i, j, k] = scene.voxels[n]!;
      m.makeTranslation(i + 0.5, j + 0.5, k + 0.5);
      this.mesh.setMatrixAt(n, m);
    }
    this.scene3.add(this.mesh);
    const [nx, ny, nz] = scene.meta.dims;
    this.controls.target.set(nx / 2, ny / 2, nz / 2);
    this.camera.position.set(nx * 1.4, ny * 1.4, nz * 1.8);
    this.camera.lookAt(this.controls.target);
  }

  private sync(): void {
    const scene = this.store.state.scene;
    if (!scene) return;
    if (!this.mesh || this.mesh.count !== scene.voxels.length) {
      this.rebuildMesh();
    }
    if (!this.mesh) return;
    const { displayMode, highlight } = this.store.state;
    const color = new THREE.Color();
    for (let n = 0; n < scene.voxels.length; n++) {
      const [i, j, k, cls, inst] = scene.voxels[n]!;
      const isBackground = this.backgroundIds.has(cls);
      if (displayMode === "semantic") {
        color.set(classColor(cls));
        if (isBackground) color.multiplyScalar(0.45);
      } else if (displayMode === "instance") {
        if (isBackground || inst === 0) {
          color.set(BACKGROUND_DIM);
        } else {
          color.set(instanceColor(inst));
        }
      } else {
        if (highlight.has(voxelKey(i, j, k))) {
          color.set(HIGHLIGHT_COLOR);
        } else if (isBackground) {
          color.set(BACKGROUND_DIM);
        } else {
          color.set(OTHER_INSTANCE_GRAY);
        }
      }
      this.mesh.setColorAt(n, color);
    }
    if (this.mesh.instanceColor) this.mesh.instanceColor.needsUpdate = true;
  }
}
