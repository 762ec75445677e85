#!/usr/bin/env node
/**
 * kpzlat-plot: render harness CSV artifacts as deterministic SVG figures.
 *
 *   kpzlat-plot <kind> --in <csv> [--in <csv> ...] --out <file.svg>
 *               [--xscale linear|log] [--yscale linear|log] [--title text]
 *
 * Kinds: qv | bg | variance | autocov.
 * Exit codes: 0 success, 1 bad input data (missing file, schema mismatch,
 * no data rows), 2 usage error.
 */

import { readFileSync, realpathSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { AxisOptions, renderAutocov, renderBg, renderQv, renderVariance } from "./charts.js";
import { CsvError, Table, parseTable } from "./csv.js";
import { ScaleKind } from "./scale.js";

const KINDS = ["qv", "bg", "variance", "autocov"] as const;
type Kind = (typeof KINDS)[number];

const USAGE =
  "usage: kpzlat-plot <qv|bg|variance|autocov> --in <csv> [--in <csv> ...] " +
  "--out <file.svg> [--xscale linear|log] [--yscale linear|log] [--title text]";

function parseScale(raw: string | undefined, flag: string): ScaleKind | undefined {
  if (raw === undefined) return undefined;
  if (raw === "linear" || raw === "log") return raw;
  throw new UsageError(`${flag} must be 'linear' or 'log', got '${raw}'`);
}

class UsageError extends Error {}

export function render(kind: Kind, tables: Table[], opts: AxisOptions): string {
  switch (kind) {
    case "qv":
      return renderQv(single(tables, "qv"), opts);
    case "bg":
      return renderBg(single(tables, "bg"), opts);
    case "variance":
      return renderVariance(tables, opts);
    case "autocov":
      return renderAutocov(single(tables, "autocov"), opts);
  }
}

function single(tables: Table[], kind: string): Table {
  if (tables.length !== 1) {
    throw new UsageError(`figure kind '${kind}' takes exactly one --in file, got ${tables.length}`);
  }
  return tables[0]!;
}

export function runCli(argv: string[], log: (msg: string) => void = console.error): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        in: { type: "string", multiple: true },
        out: { type: "string" },
        xscale: { type: "string" },
        yscale: { type: "string" },
        title: { type: "string" },
      },
    });
  } catch (err) {
    log(`${(err as Error).message}\n${USAGE}`);
    return 2;
  }

  try {
    const positionals = parsed.positionals;
    if (positionals.length !== 1) {
      throw new UsageError(USAGE);
    }
    const kind = positionals[0] as Kind;
    if (!KINDS.includes(kind)) {
      throw new UsageError(`unknown figure kind '${positionals[0]}'\n${USAGE}`);
    }
    const inputs = parsed.values.in ?? [];
    const out = parsed.values.out;
    if (inputs.length === 0 || out === undefined) {
      throw new UsageError(USAGE);
    }
    if (kind !== "variance" && inputs.length !== 1) {
      throw new UsageError(`figure kind '${kind}' takes exactly one --in file, got ${inputs.length}`);
    }
    const opts: AxisOptions = {
      xscale: parseScale(parsed.values.xscale, "--xscale"),
      yscale: parseScale(parsed.values.yscale, "--yscale"),
      title: parsed.values.title,
    };

    const tables = inputs.map((path) => {
      let body: string;
      try {
        body = readFileSync(path, "utf-8");
      } catch {
        throw new CsvError(`cannot read input file ${path}`);
      }
      return parseTable(body);
    });
    const svg = render(kind, tables, opts);
    writeFileSync(out, svg);
    return 0;
  } catch (err) {
    if (err instanceof UsageError) {
      log(err.message);
      return 2;
    }
    log((err as Error).message);
    return 1;
  }
}

function invokedDirectly(): boolean {
  const entry = process.argv[1];
  if (entry === undefined) return false;
  try {
    return import.meta.url === pathToFileURL(realpathSync(entry)).href;
  } catch {
    return false;
  }
}

if (invokedDirectly()) {
  process.exit(runCli(process.argv.slice(2)));
}
