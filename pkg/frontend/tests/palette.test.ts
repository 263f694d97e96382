import { describe, expect, it } from "vitest";

import { classColor, instanceColor } from "../src/palette.js";

describe("instance palette", () => {
  it("gives the first 12 instance ids pairwise distinct colors", () => {
    const colors = new Set<string>();
    for (let id = 1; id <= 12; id++) {
      colors.add(instanceColor(id));
    }
    expect(colors.size).toBe(12);
  });

  it("colors non-instances gray", () => {
    expect(instanceColor(0)).toBe("#3a3a3a");
  });

  it("emits css hex colors", () => {
    for (let id = 0; id <= 20; id++) {
      expect(instanceColor(id)).toMatch(/^#[0-9a-f]{6}$/);
      expect(classColor(id)).toMatch(/^#[0-9a-f]{6}$/);
    }
  });
});
