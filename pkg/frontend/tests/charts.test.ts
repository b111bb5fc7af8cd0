import { describe, expect, it } from "vitest";

import { makeScale, medianFromCurve, medianMarker, pathFor, shareBars } from "../src/charts";

const BOX = { width: 100, height: 60, pad: 10 };

describe("medianFromCurve", () => {
  it("interpolates the crossing linearly", () => {
    // cdf hits 0.5 exactly halfway between 0.2 and 0.3
    const omega = [0.0, 0.2, 0.3, 1.0];
    const cdf = [0.0, 0.4, 0.6, 1.0];
    expect(medianFromCurve(omega, cdf)).toBeCloseTo(0.25, 12);
  });

  it("matches a known analytic median on a fine grid", () => {
    // singular-case prior at rate 1: cdf = (1 - exp(-sqrt(w))) / (1 - exp(-1))
    const omega = Array.from({ length: 2001 }, (_, i) => i / 2000);
    const cdf = omega.map((w) => (1 - Math.exp(-Math.sqrt(w))) / (1 - Math.exp(-1)));
    // analytic median: sqrt(w) = -log(1 - 0.5 (1 - e^-1)) => w = ...
    const wMed = Math.log(1 - 0.5 * (1 - Math.exp(-1))) ** 2;
    expect(medianFromCurve(omega, cdf)).toBeCloseTo(wMed, 6);
  });

  it("clamps to the grid ends", () => {
    expect(medianFromCurve([0.4, 0.6], [0.7, 0.9])).toBe(0.4);
    expect(medianFromCurve([0.1, 0.2], [0.0, 0.2])).toBe(0.2);
  });

  it("rejects malformed curves", () => {
    expect(() => medianFromCurve([0.1], [0.5])).toThrow();
  });
});

describe("scales and paths", () => {
  it("maps the unit interval onto the padded box", () => {
    const scale = makeScale([{ x: [0, 1], y: [0, 2] }], BOX);
    expect(scale.x(0)).toBe(10);
    expect(scale.x(1)).toBe(90);
    expect(scale.y(0)).toBe(50);
    expect(scale.y(2)).toBe(10);
  });

  it("log mode orders magnitudes evenly", () => {
    const scale = makeScale([{ x: [0, 1], y: [0.01, 1, 100] }], BOX, true);
    const top = scale.y(100);
    const mid = scale.y(1);
    const low = scale.y(0.01);
    expect(mid - top).toBeCloseTo(low - mid, 9);
  });

  it("emits one segment per point", () => {
    const scale = makeScale([{ x: [0, 0.5, 1], y: [1, 2, 3] }], BOX);
    const d = pathFor({ x: [0, 0.5, 1], y: [1, 2, 3] }, scale);
    expect(d.startsWith("M")).toBe(true);
    expect(d.split("L")).toHaveLength(3);
  });

  it("places the median marker at the interpolated median", () => {
    const omega = [0, 0.25, 0.5, 1];
    const cdf = [0, 0.3, 0.7, 1];
    const scale = makeScale([{ x: omega, y: [1, 1, 1, 1] }], BOX);
    const marker = medianMarker(omega, cdf, scale, BOX);
    expect(marker.omega).toBeCloseTo(0.375, 12);
    expect(marker.x).toBeCloseTo(scale.x(0.375), 12);
  });
});

describe("shareBars", () => {
  it("positions one bar per leaf with its quantiles", () => {
    const { bars } = shareBars(
      {
        a: { "q0.025": 0.01, "q0.25": 0.1, "q0.5": 0.3, "q0.75": 0.5, "q0.975": 0.9, mean: 0.33 },
        b: { "q0.025": 0.02, "q0.25": 0.2, "q0.5": 0.4, "q0.75": 0.6, "q0.975": 0.95, mean: 0.4 },
      },
      BOX,
    );
    expect(bars).toHaveLength(2);
    expect(bars[0].label).toBe("a");
    expect(bars[0].q).toEqual([0.01, 0.1, 0.3, 0.5, 0.9]);
    expect(bars[1].x).toBeGreaterThan(bars[0].x);
  });
});
