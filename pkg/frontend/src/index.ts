export {
  AUTOCOV_COLUMNS,
  BG_COLUMNS,
  QV_COLUMNS,
  VARIANCE_COLUMNS,
  renderAutocov,
  renderBg,
  renderQv,
  renderVariance,
} from "./charts.js";
export type { AxisOptions } from "./charts.js";
export { CsvError, NoDataError, SchemaError, parseTable, requireColumns, requireRows } from "./csv.js";
export type { Table } from "./csv.js";
export { fitLine, fitPowerLaw, linearScale, linearTicks, logScale, logTicks, makeScale, padDomain } from "./scale.js";
export type { Scale, ScaleKind } from "./scale.js";
export { runCli } from "./cli.js";
