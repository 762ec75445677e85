import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { renderAutocov, renderBg, renderQv, renderVariance } from "../src/charts.js";
import { NoDataError, SchemaError, Table, parseTable } from "../src/csv.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

function fixture(name: string): Table {
  return parseTable(readFileSync(join(FIXTURES, name), "utf-8"));
}

function count(haystack: string, needle: string): number {
  return haystack.split(needle).length - 1;
}

describe("renderQv", () => {
  it("draws one marker per lattice size plus the reference level", () => {
    const svg = renderQv(fixture("qv.csv"));
    expect(svg.startsWith('<svg xmlns="http://www.w3.org/2000/svg"')).toBe(true);
    expect(count(svg, "<circle")).toBe(3);
    expect(svg).toContain("limit 19.7392");
    expect(svg).toContain("lattice size n");
  });

  it("rejects a CSV with the wrong header", () => {
    expect(() => renderQv(fixture("bg.csv"))).toThrow(SchemaError);
    try {
      renderQv(fixture("bg.csv"));
    } catch (err) {
      expect((err as Error).message).toContain("missing [n, qv_rate, reference]");
      expect((err as Error).message).toContain("unexpected [window, statistic, stderr]");
    }
  });

  it("rejects a header-only CSV with a no-data error", () => {
    const empty = parseTable("n,qv_rate,reference\n");
    expect(() => renderQv(empty)).toThrow(NoDataError);
  });
});

describe("renderBg", () => {
  it("annotates both branches of the U with fitted slopes", () => {
    const svg = renderBg(fixture("bg.csv"));
    expect(count(svg, "<circle")).toBe(3);
    expect(svg).toContain("left branch slope");
    expect(svg).toContain("right branch slope");
  });

  it("recovers an exact power-law slope in the annotation", () => {
    const rows = [2, 4, 8, 16]
      .map((ell) => `${ell},${(0.001 * ell).toPrecision(17)},0`)
      .join("\n");
    const table = parseTable(`window,statistic,stderr\n${rows}\n`);
    const svg = renderBg(table);
    // monotone data: the whole curve is one rising branch
    expect(svg).not.toContain("left branch slope");
    expect(svg).toContain("right branch slope +1.00");
  });
});

describe("renderVariance", () => {
  it("overlays several inputs against the exact-match diagonal", () => {
    const svg = renderVariance([fixture("variance_sin1.csv"), fixture("variance_mixed3.csv")]);
    expect(count(svg, "<circle")).toBe(2);
    expect(svg).toContain("exact match");
    expect(svg).toContain("sin1");
    expect(svg).toContain("mixed3");
  });

  it("names the offending columns on schema mismatch", () => {
    expect(() => renderVariance([fixture("qv.csv")])).toThrow(/missing \[phi, species, variance, stderr/);
  });
});

describe("renderAutocov", () => {
  it("overlays the lattice and spectral sides", () => {
    const svg = renderAutocov(fixture("compare.csv"));
    expect(svg).toContain("lattice");
    expect(svg).toContain("sbe");
    // markers only on the lattice side: three recorded times
    expect(count(svg, "<circle")).toBe(3);
    expect(count(svg, "<polyline")).toBe(2);
  });
});
