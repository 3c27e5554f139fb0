/**
 * Readers for the CLI's CSV/JSON outputs.
 *
 * Every reader validates the documented schema up front and throws
 * SchemaMismatch naming the offending column, so a wrong or truncated
 * input fails loudly instead of producing an empty figure.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

export class SchemaMismatch extends Error {
  constructor(public readonly column: string, detail?: string) {
    super(`schema mismatch on column '${column}'${detail ? `: ${detail}` : ""}`);
    this.name = "SchemaMismatch";
  }
}

function parseNumber(raw: string, column: string, row: number): number {
  const value = Number(raw);
  if (raw === "" || raw === undefined || !Number.isFinite(value)) {
    throw new SchemaMismatch(column, `row ${row} holds ${JSON.stringify(raw)}`);
  }
  return value;
}

function splitCsv(text: string): string[][] {
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  return parsed.data as string[][];
}

export interface SurvivalData {
  meta: Record<string, string>;
  times: number[];
  /** modulus |A_ij(t)| per matrix entry, keyed by the CSV column label */
  moduli: Map<string, number[]>;
  n: number;
}

export function parseSurvivalCsv(text: string): SurvivalData {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length === 0 || lines[0] === "") {
    throw new SchemaMismatch("t", "empty file");
  }
  const meta: Record<string, string> = {};
  let body = text;
  if (lines[0].startsWith("#")) {
    for (const item of lines[0].slice(1).trim().split(",")) {
      const eq = item.indexOf("=");
      if (eq > 0) meta[item.slice(0, eq).trim()] = item.slice(eq + 1).trim();
    }
    body = lines.slice(1).join("\n");
  }
  const rows = splitCsv(body);
  if (rows.length < 2) throw new SchemaMismatch("t", "no data rows");
  const header = rows[0];
  if (header[0] !== "t") throw new SchemaMismatch("t", `header starts with '${header[0]}'`);
  const n = Number(meta["n"] ?? Math.sqrt((header.length - 1) / 2));
  if (!Number.isInteger(n) || n < 1) throw new SchemaMismatch("t", "cannot infer matrix size");
  if (header.length !== 1 + 2 * n * n) {
    throw new SchemaMismatch(header[header.length - 1] ?? "t", "column count does not match n");
  }

  const times: number[] = [];
  const moduli = new Map<string, number[]>();
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) moduli.set(`|A_${i + 1}_${j + 1}|`, []);
  }
  rows.slice(1).forEach((row, k) => {
    times.push(parseNumber(row[0], "t", k + 1));
    let col = 1;
    for (let i = 0; i < n; i++) {
      for (let j = 0; j < n; j++) {
        const re = parseNumber(row[col], header[col], k + 1);
        const im = parseNumber(row[col + 1], header[col + 1], k + 1);
        moduli.get(`|A_${i + 1}_${j + 1}|`)!.push(Math.hypot(re, im));
        col += 2;
      }
    }
  });
  return { meta, times, moduli, n };
}

export interface DivisibilityReport {
  cpDivisible: boolean;
  pDivisible: boolean;
  semigroup: boolean;
  firstViolationTime: number | null;
  tol: number;
  model?: string;
}

export function parseDivisibilityReport(text: string): DivisibilityReport {
  let data: Record<string, unknown>;
  try {
    data = JSON.parse(text);
  } catch (err) {
    throw new SchemaMismatch("cp_divisible", "not valid JSON");
  }
  for (const key of ["cp_divisible", "p_divisible", "semigroup", "tol"]) {
    if (!(key in data)) throw new SchemaMismatch(key, "missing report field");
  }
  return {
    cpDivisible: Boolean(data["cp_divisible"]),
    pDivisible: Boolean(data["p_divisible"]),
    semigroup: Boolean(data["semigroup"]),
    firstViolationTime: (data["first_violation_time"] as number | null) ?? null,
    tol: Number(data["tol"]),
    model: data["model"] as string | undefined,
  };
}

export interface TimeseriesData {
  t: number[];
  opnorm: number[];
  /** forward differences; the final grid point has none */
  dnormDt: (number | null)[];
  minStepChoiEig: (number | null)[];
}

export function parseTimeseriesCsv(text: string): TimeseriesData {
  const rows = splitCsv(text);
  if (rows.length < 2) throw new SchemaMismatch("t", "no data rows");
  const header = rows[0];
  const required = ["t", "opnorm", "dnorm_dt", "min_step_choi_eig"];
  required.forEach((name, i) => {
    if (header[i] !== name) throw new SchemaMismatch(name, `found '${header[i]}'`);
  });
  const out: TimeseriesData = { t: [], opnorm: [], dnormDt: [], minStepChoiEig: [] };
  rows.slice(1).forEach((row, k) => {
    out.t.push(parseNumber(row[0], "t", k + 1));
    out.opnorm.push(parseNumber(row[1], "opnorm", k + 1));
    out.dnormDt.push(row[2] === "" || row[2] === undefined ? null : parseNumber(row[2], "dnorm_dt", k + 1));
    out.minStepChoiEig.push(row[3] === "" || row[3] === undefined ? null : parseNumber(row[3], "min_step_choi_eig", k + 1));
  });
  return out;
}

export interface GapSweepRow {
  W: number;
  M: number;
  nMax: number;
  gap: number;
}

export function parseGapSweepCsv(text: string): GapSweepRow[] {
  const rows = splitCsv(text);
  if (rows.length < 2) throw new SchemaMismatch("W", "no data rows");
  const header = rows[0];
  const required = ["W", "M", "n_max", "gap"];
  required.forEach((name, i) => {
    if (header[i] !== name) throw new SchemaMismatch(name, `found '${header[i]}'`);
  });
  return rows.slice(1).map((row, k) => ({
    W: parseNumber(row[0], "W", k + 1),
    M: parseNumber(row[1], "M", k + 1),
    nMax: parseNumber(row[2], "n_max", k + 1),
    gap: parseNumber(row[3], "gap", k + 1),
  }));
}

export function readText(path: string): string {
  return readFileSync(path, "utf-8");
}
