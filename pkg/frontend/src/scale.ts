/** Axis scales and tick placement, all deterministic. */

export type ScaleKind = "linear" | "log";

export interface Scale {
  kind: ScaleKind;
  domain: [number, number];
  range: [number, number];
  map(value: number): number;
  ticks(): number[];
}

/** Extend [lo, hi] by a small fraction so markers do not sit on the frame. */
export function padDomain(lo: number, hi: number, frac = 0.05): [number, number] {
  if (lo === hi) {
    const eps = lo === 0 ? 1 : Math.abs(lo) * frac;
    return [lo - eps, hi + eps];
  }
  const pad = (hi - lo) * frac;
  return [lo - pad, hi + pad];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0;
  return {
    kind: "linear",
    domain,
    range,
    map: (v) => r0 + ((v - d0) / span) * (r1 - r0),
    ticks: () => linearTicks(d0, d1),
  };
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  if (d0 <= 0 || d1 <= 0) {
    throw new Error(`log scale requires positive domain, got [${d0}, ${d1}]`);
  }
  const l0 = Math.log10(d0);
  const l1 = Math.log10(d1);
  const span = l1 - l0;
  return {
    kind: "log",
    domain,
    range,
    map: (v) => range[0] + ((Math.log10(v) - l0) / span) * (range[1] - range[0]),
    ticks: () => logTicks(d0, d1),
  };
}

/**
 * Error-balanced 1/2/5 tick spacing (round to whichever nice step is
 * closest in log space), covering the domain interior.
 */
export function linearTicks(lo: number, hi: number, target = 6): number[] {
  const span = hi - lo;
  if (!(span > 0)) return [lo];
  const rawStep = span / target;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const norm = rawStep / mag;
  const mantissa =
    norm >= Math.sqrt(50) ? 10 : norm >= Math.sqrt(10) ? 5 : norm >= Math.SQRT2 ? 2 : 1;
  const step = mantissa * mag;
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + step * 1e-9; v += step) {
    // snap away float accumulation so labels format cleanly
    ticks.push(Number((Math.round(v / step) * step).toPrecision(12)));
  }
  return ticks;
}

/**
 * Decade ticks 10^k inside the domain; if fewer than two fit, fall back to
 * 1-2-5 mantissa ticks per decade so short log ranges still get labels.
 */
export function logTicks(lo: number, hi: number): number[] {
  const kLo = Math.ceil(Math.log10(lo) - 1e-9);
  const kHi = Math.floor(Math.log10(hi) + 1e-9);
  const decades: number[] = [];
  for (let k = kLo; k <= kHi; k += 1) decades.push(Math.pow(10, k));
  if (decades.length >= 2) return decades;
  const ticks: number[] = [];
  for (let k = Math.floor(Math.log10(lo)); k <= kHi; k += 1) {
    for (const m of [1, 2, 5]) {
      const v = m * Math.pow(10, k);
      if (v >= lo * (1 - 1e-9) && v <= hi * (1 + 1e-9)) ticks.push(v);
    }
  }
  return ticks;
}

export function makeScale(kind: ScaleKind, domain: [number, number], range: [number, number]): Scale {
  return kind === "log" ? logScale(domain, range) : linearScale(domain, range);
}

/** Least-squares slope/intercept of y against x. */
export function fitLine(xs: number[], ys: number[]): { slope: number; intercept: number } {
  const n = xs.length;
  if (n < 2 || n !== ys.length) {
    throw new Error(`need at least two matched points, got ${xs.length}/${ys.length}`);
  }
  let sx = 0;
  let sy = 0;
  for (let i = 0; i < n; i += 1) {
    sx += xs[i]!;
    sy += ys[i]!;
  }
  const mx = sx / n;
  const my = sy / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i += 1) {
    const dx = xs[i]! - mx;
    sxx += dx * dx;
    sxy += dx * (ys[i]! - my);
  }
  if (sxx === 0) {
    throw new Error("degenerate fit: all x values identical");
  }
  const slope = sxy / sxx;
  return { slope, intercept: my - slope * mx };
}

/** Slope of log10(y) against log10(x): the exponent of a power law. */
export function fitPowerLaw(xs: number[], ys: number[]): { slope: number; intercept: number } {
  return fitLine(xs.map(Math.log10), ys.map(Math.log10));
}
