/** Color assignment. Instance colors deliberately carry no semantic meaning;
 * class colors are a fixed indoor-ish table. */

const CLASS_COLORS = [
  "#000000", // empty (never drawn)
  "#b8c4cc", // ceiling
  "#8a7b66", // floor
  "#a9a29a", // wall
  "#7ec8e3", // window
  "#b5651d", // door
  "#e3655b", // chair
  "#c98f3c", // table
  "#7d5ba6", // sofa
  "#4f9d69", // bed
  "#c74f82", // shelf
  "#e0c341", // lamp
  "#4464ad", // monitor
];

export function classColor(classId: number): string {
  return CLASS_COLORS[classId % CLASS_COLORS.length] ?? "#888888";
}

/** Golden-angle hue walk: consecutive ids land far apart on the wheel, so at
 * least the first dozen instances are clearly distinguishable. */
export function instanceColor(instanceId: number): string {
  if (instanceId <= 0) return "#3a3a3a";
  const hue = (instanceId * 137.508) % 360;
  const light = instanceId % 2 === 0 ? 62 : 48;
  return hslToHex(hue, 78, light);
}

export const HIGHLIGHT_COLOR = "#ff8c1a";
export const OTHER_INSTANCE_GRAY = "#9c9c9c";
export const BACKGROUND_DIM = "#2e2e2e";
export const MISS_COLOR = "#101014";

export function hslToHex(h: number, s: number, l: number): string {
  const sn = s / 100;
  const ln = l / 100;
  const a = sn * Math.min(ln, 1 - ln);
  const f = (n: number) => {
    const k = (n + h / 30) % 12;
    const c = ln - a * Math.max(-1, Math.min(k - 3, 9 - k, 1));
    return Math.round(255 * c)
      .toString(16)
      .padStart(2, "0");
  };
  return `#${f(0)}${f(8)}${f(4)}`;
}
