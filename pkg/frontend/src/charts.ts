// SVG chart geometry. Pure functions from curves to path strings and marker
// coordinates, so the plotting math is testable without a DOM.

export interface Box {
  width: number;
  height: number;
  pad: number;
}

export interface Series {
  x: number[];
  y: number[];
}

/** Median of a tabulated CDF curve by monotone linear interpolation. */
export function medianFromCurve(omega: number[], cdf: number[]): number {
  if (omega.length !== cdf.length || omega.length < 2) {
    throw new Error("curve arrays must align and hold at least two points");
  }
  if (cdf[0] > 0.5) return omega[0];
  for (let i = 1; i < cdf.length; i++) {
    if (cdf[i] >= 0.5) {
      const span = cdf[i] - cdf[i - 1];
      const t = span > 0 ? (0.5 - cdf[i - 1]) / span : 0;
      return omega[i - 1] + t * (omega[i] - omega[i - 1]);
    }
  }
  return omega[omega.length - 1];
}

export interface Scale {
  x: (v: number) => number;
  y: (v: number) => number;
  yMin: number;
  yMax: number;
}

/** Affine scales mapping data space onto the padded box (y grows upward). */
export function makeScale(series: Series[], box: Box, yLog = false): Scale {
  let yMin = Infinity;
  let yMax = -Infinity;
  for (const s of series) {
    for (const v of s.y) {
      const t = yLog ? Math.log10(Math.max(v, 1e-12)) : v;
      if (Number.isFinite(t)) {
        yMin = Math.min(yMin, t);
        yMax = Math.max(yMax, t);
      }
    }
  }
  if (!Number.isFinite(yMin)) {
    yMin = 0;
    yMax = 1;
  }
  if (yMax - yMin < 1e-12) yMax = yMin + 1;
  if (!yLog) yMin = Math.min(0, yMin);
  const { width, height, pad } = box;
  return {
    x: (v) => pad + v * (width - 2 * pad),
    y: (v) => {
      const t = yLog ? Math.log10(Math.max(v, 1e-12)) : v;
      return height - pad - ((t - yMin) / (yMax - yMin)) * (height - 2 * pad);
    },
    yMin,
    yMax,
  };
}

export function pathFor(series: Series, scale: Scale): string {
  const parts: string[] = [];
  for (let i = 0; i < series.x.length; i++) {
    const cmd = i === 0 ? "M" : "L";
    parts.push(`${cmd}${scale.x(series.x[i]).toFixed(2)},${scale.y(series.y[i]).toFixed(2)}`);
  }
  return parts.join(" ");
}

export interface MedianMarker {
  omega: number;
  x: number;
  y0: number;
  y1: number;
}

export function medianMarker(omega: number[], cdf: number[], scale: Scale, box: Box): MedianMarker {
  const med = medianFromCurve(omega, cdf);
  return { omega: med, x: scale.x(med), y0: box.pad, y1: box.height - box.pad };
}

export interface Bar {
  label: string;
  x: number;
  q: [number, number, number, number, number]; // 2.5, 25, 50, 75, 97.5 percentiles
}

interface QuantileLike {
  "q0.025": number;
  "q0.25": number;
  "q0.5": number;
  "q0.75": number;
  "q0.975": number;
}

/** Horizontal positions and widths for leaf-share quantile bars. */
export function shareBars<T extends QuantileLike>(
  shares: Record<string, T>,
  box: Box,
): { bars: Bar[]; slot: number } {
  const names = Object.keys(shares);
  const slot = (box.width - 2 * box.pad) / Math.max(names.length, 1);
  const bars = names.map((name, i) => ({
    label: name,
    x: box.pad + (i + 0.5) * slot,
    q: [
      shares[name]["q0.025"],
      shares[name]["q0.25"],
      shares[name]["q0.5"],
      shares[name]["q0.75"],
      shares[name]["q0.975"],
    ] as [number, number, number, number, number],
  }));
  return { bars, slot };
}
