/**
 * Minimal SVG assembly with fully deterministic output: fixed styles, fixed
 * canvas size, no timestamps, no generated ids, and one stable number
 * format, so identical inputs produce identical bytes.
 */

export const WIDTH = 640;
export const HEIGHT = 420;
export const MARGIN = { left: 66, right: 22, top: 40, bottom: 50 } as const;

export const PALETTE = ["#4361ee", "#e63946", "#2d6a4f", "#b5179e", "#f77f00", "#555555"];
export const FONT = "11px sans-serif";

/** Stable coordinate format: enough precision to be faithful, no float tails. */
export function fmt(v: number): string {
  if (Number.isInteger(v) && Math.abs(v) < 1e15) return String(v);
  const s = v.toPrecision(8);
  // strip trailing zeros without touching exponent notation
  if (s.includes("e")) {
    const [mant, exp] = s.split("e") as [string, string];
    return `${trimZeros(mant)}e${exp}`;
  }
  return trimZeros(s);
}

function trimZeros(s: string): string {
  return s.includes(".") ? s.replace(/0+$/, "").replace(/\.$/, "") : s;
}

/** Short label for tick marks: switches to exponent form for extreme values. */
export function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e5 || a < 1e-3) {
    const e = Math.floor(Math.log10(a));
    const m = v / Math.pow(10, e);
    const ms = trimZeros(m.toPrecision(3));
    return `${ms}e${e}`;
  }
  return trimZeros(v.toPrecision(6));
}

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface Attrs {
  [key: string]: string | number | undefined;
}

export function tag(name: string, attrs: Attrs, body?: string): string {
  const parts = [`<${name}`];
  for (const key of Object.keys(attrs)) {
    const value = attrs[key];
    if (value === undefined) continue;
    const text = typeof value === "number" ? fmt(value) : value;
    parts.push(` ${key}="${text}"`);
  }
  if (body === undefined) {
    parts.push("/>");
  } else {
    parts.push(`>${body}</${name}>`);
  }
  return parts.join("");
}

export function line(x1: number, y1: number, x2: number, y2: number, stroke: string, extra: Attrs = {}): string {
  return tag("line", { x1, y1, x2, y2, stroke, "stroke-width": extra["stroke-width"] ?? 1, ...extra });
}

export function circle(cx: number, cy: number, r: number, fill: string, extra: Attrs = {}): string {
  return tag("circle", { cx, cy, r, fill, ...extra });
}

export function text(x: number, y: number, content: string, extra: Attrs = {}): string {
  return tag(
    "text",
    { x, y, "font-family": "sans-serif", "font-size": 11, fill: "#222", ...extra },
    esc(content),
  );
}

export function polyline(points: Array<[number, number]>, stroke: string, extra: Attrs = {}): string {
  const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
  return tag("polyline", { points: pts, fill: "none", stroke, "stroke-width": extra["stroke-width"] ?? 1.5, ...extra });
}

export function document(body: string[]): string {
  const open = `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`;
  const bg = tag("rect", { x: 0, y: 0, width: WIDTH, height: HEIGHT, fill: "#ffffff" });
  return [open, bg, ...body, "</svg>", ""].join("\n");
}
