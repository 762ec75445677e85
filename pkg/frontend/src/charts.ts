/**
 * Figure builders: each takes parsed tables and returns a complete SVG
 * document string.  Every statistic plotted here was computed by the
 * simulation harness; this layer only maps numbers to coordinates (the one
 * exception, branch-slope fits on the window sweep, is an annotation of the
 * displayed points, not a new estimate).
 */

import { Table, num, requireColumns, requireRows, str } from "./csv.js";
import { Scale, ScaleKind, fitPowerLaw, makeScale, padDomain } from "./scale.js";
import {
  HEIGHT,
  MARGIN,
  PALETTE,
  WIDTH,
  circle,
  document as svgDocument,
  fmt,
  line,
  polyline,
  tag,
  text,
  tickLabel,
} from "./svg.js";

export interface AxisOptions {
  xscale?: ScaleKind;
  yscale?: ScaleKind;
  title?: string;
}

const PLOT = {
  x0: MARGIN.left,
  x1: WIDTH - MARGIN.right,
  y0: HEIGHT - MARGIN.bottom,
  y1: MARGIN.top,
} as const;

interface Frame {
  x: Scale;
  y: Scale;
  body: string[];
}

function frame(
  xDomain: [number, number],
  yDomain: [number, number],
  opts: { xscale: ScaleKind; yscale: ScaleKind; title: string; xlabel: string; ylabel: string },
): Frame {
  const x = makeScale(opts.xscale, xDomain, [PLOT.x0, PLOT.x1]);
  const y = makeScale(opts.yscale, yDomain, [PLOT.y0, PLOT.y1]);
  const body: string[] = [];
  for (const v of x.ticks()) {
    const px = x.map(v);
    body.push(line(px, PLOT.y0, px, PLOT.y1, "#eeeeee"));
    body.push(line(px, PLOT.y0, px, PLOT.y0 + 4, "#222222"));
    body.push(text(px, PLOT.y0 + 16, tickLabel(v), { "text-anchor": "middle" }));
  }
  for (const v of y.ticks()) {
    const py = y.map(v);
    body.push(line(PLOT.x0, py, PLOT.x1, py, "#eeeeee"));
    body.push(line(PLOT.x0 - 4, py, PLOT.x0, py, "#222222"));
    body.push(text(PLOT.x0 - 7, py + 3.5, tickLabel(v), { "text-anchor": "end" }));
  }
  body.push(line(PLOT.x0, PLOT.y0, PLOT.x1, PLOT.y0, "#222222"));
  body.push(line(PLOT.x0, PLOT.y0, PLOT.x0, PLOT.y1, "#222222"));
  body.push(text(PLOT.x0, MARGIN.top - 14, opts.title, { "font-size": 13, "font-weight": "bold" }));
  body.push(
    text((PLOT.x0 + PLOT.x1) / 2, HEIGHT - 12, opts.xlabel, { "text-anchor": "middle" }),
  );
  body.push(
    tag(
      "text",
      {
        x: 16,
        y: (PLOT.y0 + PLOT.y1) / 2,
        "font-family": "sans-serif",
        "font-size": 11,
        fill: "#222",
        "text-anchor": "middle",
        transform: `rotate(-90 16 ${fmt((PLOT.y0 + PLOT.y1) / 2)})`,
      },
      opts.ylabel,
    ),
  );
  return { x, y, body };
}

function legend(body: string[], entries: Array<{ label: string; color: string; dash?: string }>): void {
  let yPos = MARGIN.top + 8;
  const xLine = PLOT.x1 - 150;
  for (const entry of entries) {
    body.push(
      line(xLine, yPos - 4, xLine + 22, yPos - 4, entry.color, {
        "stroke-width": 2,
        "stroke-dasharray": entry.dash,
      }),
    );
    body.push(text(xLine + 28, yPos, entry.label));
    yPos += 16;
  }
}

function errorBar(f: Frame, xv: number, yv: number, se: number, color: string): string[] {
  if (!(se > 0)) return [];
  const lo = f.y.kind === "log" ? Math.max(yv - se, yv / 10) : yv - se;
  const hi = yv + se;
  const px = f.x.map(xv);
  return [
    line(px, f.y.map(lo), px, f.y.map(hi), color),
    line(px - 3, f.y.map(lo), px + 3, f.y.map(lo), color),
    line(px - 3, f.y.map(hi), px + 3, f.y.map(hi), color),
  ];
}

// ---------------------------------------------------------------------------
// quadratic-variation rate vs lattice size
// ---------------------------------------------------------------------------

export const QV_COLUMNS = ["n", "qv_rate", "reference"];

export function renderQv(table: Table, opts: AxisOptions = {}): string {
  requireColumns(table, QV_COLUMNS, "qv figure input");
  requireRows(table, "qv figure input");
  const rows = table.rows
    .map((r) => ({ n: num(r, "n"), rate: num(r, "qv_rate"), ref: num(r, "reference") }))
    .sort((a, b) => a.n - b.n);
  const reference = rows[0]!.ref;
  const ns = rows.map((r) => r.n);
  const rates = rows.map((r) => r.rate);
  const yLo = Math.min(...rates, reference);
  const yHi = Math.max(...rates, reference);
  const f = frame(
    [ns[0]!, ns[ns.length - 1]!],
    padDomain(yLo, yHi, 0.15),
    {
      xscale: opts.xscale ?? "log",
      yscale: opts.yscale ?? "linear",
      title: opts.title ?? "Quadratic-variation rate vs lattice size",
      xlabel: "lattice size n",
      ylabel: "qv rate",
    },
  );
  const refY = f.y.map(reference);
  f.body.push(
    line(PLOT.x0, refY, PLOT.x1, refY, PALETTE[2]!, { "stroke-dasharray": "6,3", "stroke-width": 1.5 }),
  );
  f.body.push(polyline(rows.map((r) => [f.x.map(r.n), f.y.map(r.rate)]), PALETTE[0]!));
  for (const r of rows) {
    f.body.push(circle(f.x.map(r.n), f.y.map(r.rate), 3.5, PALETTE[0]!));
  }
  legend(f.body, [
    { label: "measured rate", color: PALETTE[0]! },
    { label: `limit ${tickLabel(reference)}`, color: PALETTE[2]!, dash: "6,3" },
  ]);
  return svgDocument(f.body);
}

// ---------------------------------------------------------------------------
// replacement-statistic window sweep (log-log U-curve)
// ---------------------------------------------------------------------------

export const BG_COLUMNS = ["window", "statistic", "stderr"];

export function renderBg(table: Table, opts: AxisOptions = {}): string {
  requireColumns(table, BG_COLUMNS, "bg figure input");
  requireRows(table, "bg figure input");
  const rows = table.rows
    .map((r) => ({ ell: num(r, "window"), stat: num(r, "statistic"), se: num(r, "stderr") }))
    .sort((a, b) => a.ell - b.ell);
  const stats = rows.map((r) => r.stat);
  const f = frame(
    [rows[0]!.ell, rows[rows.length - 1]!.ell],
    [Math.min(...stats) / 1.8, Math.max(...stats) * 1.8],
    {
      xscale: opts.xscale ?? "log",
      yscale: opts.yscale ?? "log",
      title: opts.title ?? "Replacement statistic vs averaging window",
      xlabel: "window size",
      ylabel: "statistic",
    },
  );
  for (const r of rows) {
    f.body.push(...errorBar(f, r.ell, r.stat, r.se, PALETTE[0]!));
  }
  f.body.push(polyline(rows.map((r) => [f.x.map(r.ell), f.y.map(r.stat)]), PALETTE[0]!, { "stroke-width": 1 }));
  for (const r of rows) {
    f.body.push(circle(f.x.map(r.ell), f.y.map(r.stat), 3.5, PALETTE[0]!));
  }

  // annotate the two branches of the U with fitted log-log slopes
  let iMin = 0;
  for (let i = 1; i < rows.length; i += 1) {
    if (rows[i]!.stat < rows[iMin]!.stat) iMin = i;
  }
  const entries: Array<{ label: string; color: string; dash?: string }> = [
    { label: "statistic", color: PALETTE[0]! },
  ];
  const branches: Array<{ pts: typeof rows; color: string; name: string }> = [
    { pts: rows.slice(0, iMin + 1), color: PALETTE[1]!, name: "left branch" },
    { pts: rows.slice(iMin), color: PALETTE[2]!, name: "right branch" },
  ];
  for (const branch of branches) {
    if (branch.pts.length < 2) continue;
    const fit = fitPowerLaw(branch.pts.map((r) => r.ell), branch.pts.map((r) => r.stat));
    const ends = [branch.pts[0]!.ell, branch.pts[branch.pts.length - 1]!.ell];
    const lineY = (ell: number) => Math.pow(10, fit.intercept + fit.slope * Math.log10(ell));
    f.body.push(
      polyline(ends.map((e) => [f.x.map(e), f.y.map(lineY(e))]), branch.color, {
        "stroke-dasharray": "5,3",
        "stroke-width": 1.2,
      }),
    );
    const slope = fit.slope;
    const label = `${branch.name} slope ${slope >= 0 ? "+" : ""}${slope.toFixed(2)}`;
    entries.push({ label, color: branch.color, dash: "5,3" });
  }
  legend(f.body, entries);
  return svgDocument(f.body);
}

// ---------------------------------------------------------------------------
// fixed-time pairing variance vs test-function norm
// ---------------------------------------------------------------------------

export const VARIANCE_COLUMNS = ["phi", "species", "variance", "stderr", "reference"];

export function renderVariance(tables: Table[], opts: AxisOptions = {}): string {
  if (tables.length === 0) throw new Error("variance figure needs at least one input");
  const groups = tables.map((table, idx) => {
    const label = `variance figure input ${idx + 1}`;
    requireColumns(table, VARIANCE_COLUMNS, label);
    requireRows(table, label);
    return table.rows.map((r) => ({
      phi: str(r, "phi"),
      variance: num(r, "variance"),
      se: num(r, "stderr"),
      ref: num(r, "reference"),
    }));
  });
  const all = groups.flat();
  const lo = Math.min(...all.map((p) => Math.min(p.ref, p.variance - p.se)));
  const hi = Math.max(...all.map((p) => Math.max(p.ref, p.variance + p.se)));
  const domain = padDomain(Math.min(lo, 0), hi, 0.08);
  const f = frame(domain, domain, {
    xscale: opts.xscale ?? "linear",
    yscale: opts.yscale ?? "linear",
    title: opts.title ?? "Fixed-time pairing variance vs test-function norm",
    xlabel: "squared norm",
    ylabel: "pairing variance",
  });
  f.body.push(
    line(f.x.map(domain[0]), f.y.map(domain[0]), f.x.map(domain[1]), f.y.map(domain[1]), "#888888", {
      "stroke-dasharray": "6,3",
    }),
  );
  const entries: Array<{ label: string; color: string; dash?: string }> = [
    { label: "exact match", color: "#888888", dash: "6,3" },
  ];
  groups.forEach((points, gi) => {
    const color = PALETTE[gi % PALETTE.length]!;
    for (const p of points) {
      f.body.push(...errorBar(f, p.ref, p.variance, p.se, color));
      f.body.push(circle(f.x.map(p.ref), f.y.map(p.variance), 4, color));
    }
    const names = [...new Set(points.map((p) => p.phi))].join(", ");
    entries.push({ label: names, color });
  });
  legend(f.body, entries);
  return svgDocument(f.body);
}

// ---------------------------------------------------------------------------
// lattice vs spectral autocovariance overlay
// ---------------------------------------------------------------------------

export const AUTOCOV_COLUMNS = ["side", "time", "species", "autocov", "stderr"];

const SIDE_STYLE: Record<string, { dash?: string; markers: boolean }> = {
  lattice: { markers: true },
  sbe: { markers: false },
  exact_ou: { dash: "6,3", markers: false },
};

export function renderAutocov(table: Table, opts: AxisOptions = {}): string {
  requireColumns(table, AUTOCOV_COLUMNS, "autocovariance figure input");
  requireRows(table, "autocovariance figure input");
  const rows = table.rows.map((r) => ({
    side: str(r, "side"),
    time: num(r, "time"),
    species: num(r, "species"),
    cov: num(r, "autocov"),
    se: num(r, "stderr"),
  }));
  const xs = rows.map((r) => r.time);
  const ys = rows.map((r) => r.cov);
  const f = frame(
    padDomain(Math.min(...xs), Math.max(...xs), 0.03),
    padDomain(Math.min(...ys, 0), Math.max(...ys), 0.1),
    {
      xscale: opts.xscale ?? "linear",
      yscale: opts.yscale ?? "linear",
      title: opts.title ?? "Field autocovariance: lattice vs spectral limit",
      xlabel: "time",
      ylabel: "autocovariance",
    },
  );
  f.body.push(line(PLOT.x0, f.y.map(0), PLOT.x1, f.y.map(0), "#cccccc"));

  const sides = [...new Set(rows.map((r) => r.side))];
  const speciesList = [...new Set(rows.map((r) => r.species))].sort((a, b) => a - b);
  const entries: Array<{ label: string; color: string; dash?: string }> = [];
  for (const side of sides) {
    const style = SIDE_STYLE[side] ?? { markers: true };
    for (const s of speciesList) {
      const pts = rows
        .filter((r) => r.side === side && r.species === s)
        .sort((a, b) => a.time - b.time);
      if (pts.length === 0) continue;
      const color = PALETTE[(sides.indexOf(side) + s * sides.length) % PALETTE.length]!;
      f.body.push(
        polyline(pts.map((p) => [f.x.map(p.time), f.y.map(p.cov)]), color, {
          "stroke-dasharray": style.dash,
        }),
      );
      if (style.markers) {
        for (const p of pts) {
          f.body.push(...errorBar(f, p.time, p.cov, p.se, color));
          f.body.push(circle(f.x.map(p.time), f.y.map(p.cov), 3, color));
        }
      }
      const suffix = speciesList.length > 1 ? ` s${s}` : "";
      entries.push({ label: `${side}${suffix}`, color, dash: style.dash });
    }
  }
  legend(f.body, entries);
  return svgDocument(f.body);
}
