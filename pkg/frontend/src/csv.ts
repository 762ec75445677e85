/**
 * CSV ingestion for harness artifacts.
 *
 * The harness writes plain comma-separated tables with a single header row,
 * `\n` line endings, and no quoting.  Numbers use round-trip-exact decimal
 * notation; booleans are `true`/`false`.  This module parses that dialect
 * and enforces the per-figure header contract before any rendering happens.
 */

// papaparse ships as CommonJS; a namespace default import keeps plain-node ESM happy.
import papaparse from "papaparse";

export interface Table {
  /** Column names exactly as they appear in the header row. */
  header: string[];
  /** One record per data row, keyed by column name. */
  rows: Record<string, string>[];
}

export class CsvError extends Error {}

/** Raised when a CSV header does not match the harness contract. */
export class SchemaError extends CsvError {
  readonly missing: string[];
  readonly unexpected: string[];

  constructor(label: string, missing: string[], unexpected: string[]) {
    const parts: string[] = [];
    if (missing.length > 0) parts.push(`missing [${missing.join(", ")}]`);
    if (unexpected.length > 0) parts.push(`unexpected [${unexpected.join(", ")}]`);
    super(`schema mismatch for ${label}: ${parts.join("; ")}`);
    this.missing = missing;
    this.unexpected = unexpected;
  }
}

/** Raised when a table parses but contains no data rows. */
export class NoDataError extends CsvError {
  constructor(label: string) {
    super(`no data: ${label} has a header but no rows`);
  }
}

export function parseTable(text: string): Table {
  const result = papaparse.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (result.errors.length > 0) {
    const first = result.errors[0]!;
    throw new CsvError(`malformed CSV (row ${first.row}): ${first.message}`);
  }
  const header = result.meta.fields ?? [];
  if (header.length === 0) {
    throw new CsvError("malformed CSV: empty header row");
  }
  return { header, rows: result.data };
}

/**
 * Check the header against the expected column list; order matters because
 * the harness writes a fixed order.  Reports both directions of mismatch so
 * the error names every offending column.
 */
export function requireColumns(table: Table, expected: string[], label: string): void {
  const have = new Set(table.header);
  const want = new Set(expected);
  const missing = expected.filter((c) => !have.has(c));
  const unexpected = table.header.filter((c) => !want.has(c));
  if (missing.length > 0 || unexpected.length > 0) {
    throw new SchemaError(label, missing, unexpected);
  }
}

export function requireRows(table: Table, label: string): void {
  if (table.rows.length === 0) {
    throw new NoDataError(label);
  }
}

/** Read a numeric cell; NaN and absent values are contract violations. */
export function num(row: Record<string, string>, column: string): number {
  const raw = row[column];
  if (raw === undefined || raw === "") {
    throw new CsvError(`missing value in column ${column}`);
  }
  const value = Number(raw);
  if (!Number.isFinite(value)) {
    throw new CsvError(`non-numeric value ${JSON.stringify(raw)} in column ${column}`);
  }
  return value;
}

export function str(row: Record<string, string>, column: string): string {
  const raw = row[column];
  if (raw === undefined) {
    throw new CsvError(`missing value in column ${column}`);
  }
  return raw;
}
