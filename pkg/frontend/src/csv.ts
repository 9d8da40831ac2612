/**
 * CSV reading with strict header validation.
 *
 * The CLI's CSV files are plain comma-separated numeric tables with a fixed
 * documented header; the figures never read the binary operator caches, so
 * these headers are the whole contract with the primary component. A file
 * whose header does not match the documented schema (for example a
 * column-shuffled copy) is rejected with an explicit schema error before any
 * plotting happens.
 */

import { readFileSync } from "fs";

export const SCHEMAS = {
  profile: ["x", "rho", "m1", "m2", "m3", "E", "u1", "theta", "eta"],
  transport: ["theta", "mu", "lambda", "kappa_th", "N_v", "kappa_reg"],
  residual_scan: [
    "eps",
    "norm_Y0",
    "norm_Y0_weighted",
    "norm_Y0_stretched",
    "route_disagreement",
    "microscopic_defect",
  ],
  solution_moments: ["x", "rho", "m1", "m2", "m3", "E", "corrector_norm"],
} as const;

export type SchemaName = keyof typeof SCHEMAS;

export class SchemaError extends Error {}

export interface Table {
  columns: string[];
  rows: number[][];
  /** column accessor */
  col(name: string): number[];
}

export function parseCsv(text: string, schema: SchemaName): Table {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`empty file (expected a ${schema} header)`);
  }
  const header = lines[0].split(",").map((h) => h.trim());
  const want = SCHEMAS[schema];
  if (header.length !== want.length || header.some((h, i) => h !== want[i])) {
    throw new SchemaError(
      `header mismatch for ${schema}: got [${header.join(",")}], ` +
        `expected [${want.join(",")}]`
    );
  }
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== want.length) {
      throw new SchemaError(
        `row ${i} of ${schema} has ${parts.length} fields, expected ${want.length}`
      );
    }
    const row = parts.map((p) => Number(p));
    if (row.some((v) => !Number.isFinite(v))) {
      throw new SchemaError(`row ${i} of ${schema} contains a non-numeric field`);
    }
    rows.push(row);
  }
  const columns: string[] = [...want];
  return {
    columns,
    rows,
    col(name: string): number[] {
      const j = columns.indexOf(name);
      if (j < 0) throw new SchemaError(`no column ${name}`);
      return rows.map((r) => r[j]);
    },
  };
}

export function readCsv(path: string, schema: SchemaName): Table {
  return parseCsv(readFileSync(path, "utf-8"), schema);
}

export function readJson<T>(path: string): T {
  return JSON.parse(readFileSync(path, "utf-8")) as T;
}
