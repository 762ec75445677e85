import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { beforeAll, describe, expect, it } from "vitest";

import { runCli } from "../src/cli.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

let workDir: string;
beforeAll(() => {
  workDir = mkdtempSync(join(tmpdir(), "kpzlat-plot-"));
});

function capture(): { log: (msg: string) => void; lines: string[] } {
  const lines: string[] = [];
  return { log: (msg: string) => lines.push(msg), lines };
}

describe("runCli", () => {
  it("renders a figure and exits 0", () => {
    const out = join(workDir, "qv.svg");
    const code = runCli(["qv", "--in", join(FIXTURES, "qv.csv"), "--out", out]);
    expect(code).toBe(0);
    expect(readFileSync(out, "utf-8")).toMatch(/^<svg /);
  });

  it("writes identical bytes across repeated invocations", () => {
    const outA = join(workDir, "bg_a.svg");
    const outB = join(workDir, "bg_b.svg");
    expect(runCli(["bg", "--in", join(FIXTURES, "bg.csv"), "--out", outA])).toBe(0);
    expect(runCli(["bg", "--in", join(FIXTURES, "bg.csv"), "--out", outB])).toBe(0);
    expect(readFileSync(outA)).toEqual(readFileSync(outB));
  });

  it("accepts several inputs for the variance overlay", () => {
    const out = join(workDir, "var.svg");
    const code = runCli([
      "variance",
      "--in", join(FIXTURES, "variance_sin1.csv"),
      "--in", join(FIXTURES, "variance_mixed3.csv"),
      "--out", out,
    ]);
    expect(code).toBe(0);
    expect(readFileSync(out, "utf-8")).toContain("mixed3");
  });

  it("honours axis-scale overrides", () => {
    const out = join(workDir, "bg_linear.svg");
    const code = runCli([
      "bg", "--in", join(FIXTURES, "bg.csv"), "--out", out, "--yscale", "linear",
    ]);
    expect(code).toBe(0);
  });

  it("exits 2 on usage errors", () => {
    const { log, lines } = capture();
    expect(runCli(["spectrogram", "--in", "x.csv", "--out", "y.svg"], log)).toBe(2);
    expect(lines.join("\n")).toContain("unknown figure kind");
    expect(runCli(["qv", "--out", "y.svg"], log)).toBe(2);
    expect(runCli(["qv", "--in", "a.csv", "--in", "b.csv", "--out", "y.svg"], log)).toBe(2);
    expect(runCli(["bg", "--in", "a.csv", "--out", "y.svg", "--yscale", "cubic"], log)).toBe(2);
  });

  it("exits 1 when the input file is missing", () => {
    const { log, lines } = capture();
    const code = runCli(["qv", "--in", join(workDir, "absent.csv"), "--out", join(workDir, "o.svg")], log);
    expect(code).toBe(1);
    expect(lines.join("\n")).toContain("cannot read input file");
  });

  it("exits 1 and names offending columns on schema mismatch", () => {
    const { log, lines } = capture();
    const code = runCli(
      ["qv", "--in", join(FIXTURES, "bg.csv"), "--out", join(workDir, "o.svg")],
      log,
    );
    expect(code).toBe(1);
    expect(lines.join("\n")).toContain("missing [n, qv_rate, reference]");
    expect(lines.join("\n")).toContain("unexpected [window, statistic, stderr]");
  });

  it("exits 1 with a no-data error for a header-only CSV", () => {
    const empty = join(workDir, "empty.csv");
    writeFileSync(empty, "window,statistic,stderr\n");
    const { log, lines } = capture();
    const code = runCli(["bg", "--in", empty, "--out", join(workDir, "o.svg")], log);
    expect(code).toBe(1);
    expect(lines.join("\n")).toContain("no data");
  });
});
