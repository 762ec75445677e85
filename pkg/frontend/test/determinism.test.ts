/**
 * Byte determinism: the same CSV must render to identical SVG bytes, and the
 * committed golden figures must reproduce exactly.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { renderAutocov, renderBg, renderQv, renderVariance } from "../src/charts.js";
import { Table, parseTable } from "../src/csv.js";

const HERE = dirname(fileURLToPath(import.meta.url));

function fixture(name: string): Table {
  return parseTable(readFileSync(join(HERE, "fixtures", name), "utf-8"));
}

function golden(name: string): string {
  return readFileSync(join(HERE, "golden", name), "utf-8");
}

const RENDERS: Array<{ name: string; make: () => string }> = [
  { name: "qv.svg", make: () => renderQv(fixture("qv.csv")) },
  { name: "bg.svg", make: () => renderBg(fixture("bg.csv")) },
  {
    name: "variance.svg",
    make: () => renderVariance([fixture("variance_sin1.csv"), fixture("variance_mixed3.csv")]),
  },
  { name: "autocov.svg", make: () => renderAutocov(fixture("compare.csv")) },
];

describe("render determinism", () => {
  for (const { name, make } of RENDERS) {
    it(`renders ${name} identically on repeat calls`, () => {
      expect(make()).toBe(make());
    });

    it(`reproduces the committed golden ${name} byte for byte`, () => {
      expect(make()).toBe(golden(name));
    });
  }

  it("contains no timestamps or generated ids", () => {
    for (const { make } of RENDERS) {
      const svg = make();
      expect(svg).not.toMatch(/\bid=/);
      expect(svg).not.toMatch(/20\d\d-\d\d-\d\d/);
    }
  });
});
