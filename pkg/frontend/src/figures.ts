/** Figure jobs: each kind maps CLI outputs to one SVG file.
 *
 * Kinds:
 *   profile        profile.csv                   -> rho / u1 / theta panels
 *   decay          profile.csv + summary json    -> log-amplitude + exponential overlays
 *   residual-scan  residual_scan.csv + json      -> log-log scaling with both slopes
 *   transport      transport.csv                 -> coefficient sweeps in theta
 *   kawashima      kawashima_certificates.json   -> decay rate vs tau with min(1, tau^2)
 */

import { writeFileSync } from "fs";
import { readCsv, readJson, SchemaError, Table } from "./csv.js";
import { decayRate, logLogFit } from "./fit.js";
import { document_, Panel } from "./svg.js";

export interface FigureJob {
  kind: "profile" | "decay" | "residual-scan" | "transport" | "kawashima";
  inputs: string[];
  output: string;
  format?: "svg";
  title?: string;
}

export function render(job: FigureJob): string {
  let svg: string;
  switch (job.kind) {
    case "profile":
      svg = profileFigure(readCsv(job.inputs[0], "profile"), job.title);
      break;
    case "decay":
      svg = decayFigure(
        readCsv(job.inputs[0], "profile"),
        job.inputs[1] ? readJson(job.inputs[1]) : undefined
      );
      break;
    case "residual-scan":
      svg = residualFigure(
        readCsv(job.inputs[0], "residual_scan"),
        job.inputs[1] ? readJson(job.inputs[1]) : undefined
      );
      break;
    case "transport":
      svg = transportFigure(readCsv(job.inputs[0], "transport"));
      break;
    case "kawashima":
      svg = kawashimaFigure(readJson(job.inputs[0]));
      break;
    default:
      throw new SchemaError(`unknown figure kind ${(job as FigureJob).kind}`);
  }
  if (job.format && job.format !== "svg") {
    throw new Error(`only svg output is supported, got ${job.format}`);
  }
  writeFileSync(job.output, svg);
  return svg;
}

function profileFigure(t: Table, title?: string): string {
  const x = t.col("x");
  const rho = t.col("rho");
  const u1 = t.col("u1");
  const theta = t.col("theta");
  const mk = (y: number[], name: string) => {
    const p = new Panel({
      title: name === "rho" ? (title ?? "shock profile") : undefined,
      xlabel: "x",
      ylabel: name,
    });
    p.add({ x, y, marker: false });
    return p;
  };
  return document_([mk(rho, "rho"), mk(u1, "u1"), mk(theta, "theta")]);
}

interface NsSummary {
  eps?: number;
  decay?: Record<string, { rate: number; prefactor: number }>;
}

function decayFigure(t: Table, summary?: NsSummary): string {
  const x = t.col("x");
  const n = x.length;
  const cols = ["rho", "m1", "E"].map((c) => t.col(c));
  const panels: Panel[] = [];
  for (const [side, dirTxt] of [
    ["left", "x < 0"],
    ["right", "x > 0"],
  ] as const) {
    const p = new Panel({
      title: `decay to the ${side} end state (${dirTxt})`,
      xlabel: "x",
      ylabel: "log10 |U - U_end|",
    });
    if (n > 0) {
      const endIdx = side === "left" ? 0 : n - 1;
      const amp: number[] = [];
      for (let i = 0; i < n; i++) {
        let s = 0;
        for (const c of cols) s += (c[i] - c[endIdx]) ** 2;
        amp.push(Math.sqrt(s));
      }
      // outer window [X/2, 0.85 X]; past that the deviation sits at the
      // boundary-truncation floor of the profile solver
      const X = x[n - 1];
      const sel: number[] = [];
      for (let i = 0; i < n; i++) {
        const inWin =
          side === "left"
            ? x[i] < -X / 2 && x[i] > -0.85 * X
            : x[i] > X / 2 && x[i] < 0.85 * X;
        if (inWin) sel.push(i);
      }
      const xs = sel.map((i) => x[i]);
      const ys = sel.map((i) => Math.log10(Math.max(amp[i], 1e-280)));
      p.add({ x: xs, y: ys, marker: false, label: "data" });
      if (xs.length >= 2) {
        const fit = decayRate(xs, sel.map((i) => Math.max(amp[i], 1e-280)));
        const rate = side === "left" ? fit.slope : -fit.slope;
        const over = xs.map(
          (xx) => (fit.intercept + fit.slope * xx) / Math.LN10
        );
        p.add({ x: xs, y: over, dash: "5 4", marker: false, label: "exp fit" });
        p.note(`re-fit rate ${rate.toExponential(3)}`);
        const cli = summary?.decay?.[side]?.rate;
        if (cli !== undefined) p.note(`cli rate ${cli.toExponential(3)}`);
      }
    }
    panels.push(p);
  }
  return document_(panels);
}

interface ScanSummary {
  slope?: number;
}

function residualFigure(t: Table, summary?: ScanSummary): string {
  const eps = t.col("eps");
  const y = t.col("norm_Y0");
  const p = new Panel({
    title: "residual scaling",
    xlabel: "log10 eps",
    ylabel: "log10 |E_NS|_Y0",
    xlog: true,
    ylog: true,
  });
  p.add({ x: eps, y, marker: true, label: "data" });
  if (eps.length >= 2) {
    const fit = logLogFit(eps, y);
    const over = eps.map((e) => Math.exp(fit.intercept + fit.slope * Math.log(e)));
    p.add({ x: eps, y: over, dash: "5 4", marker: false, label: "fit" });
    p.note(`re-fit slope ${fit.slope.toFixed(3)}`);
    if (summary?.slope !== undefined) p.note(`cli slope ${summary.slope.toFixed(3)}`);
  }
  return document_([p]);
}

function transportFigure(t: Table): string {
  const theta = t.col("theta");
  const panels = ["mu", "lambda", "kappa_th"].map((name) => {
    const p = new Panel({
      title: name === "mu" ? "transport coefficients" : undefined,
      xlabel: "theta",
      ylabel: name,
    });
    p.add({ x: theta, y: t.col(name), marker: true });
    return p;
  });
  return document_(panels);
}

interface KawashimaCerts {
  oscillator?: { decay_rates?: Record<string, number> };
}

function kawashimaFigure(certs: KawashimaCerts): string {
  const p = new Panel({
    title: "oscillator decay rate vs tau",
    xlabel: "log10 tau",
    ylabel: "log10 rate",
    xlog: true,
    ylog: true,
  });
  const entries = Object.entries(certs.oscillator?.decay_rates ?? {})
    .map(([k, v]) => [Number(k), v] as [number, number])
    .filter(([k, v]) => Number.isFinite(k) && v > 0)
    .sort((a, b) => a[0] - b[0]);
  if (entries.length > 0) {
    const taus = entries.map((e) => e[0]);
    const rates = entries.map((e) => e[1]);
    p.add({ x: taus, y: rates, marker: true, label: "measured" });
    const scale = rates[0] / Math.min(1, taus[0] ** 2);
    p.add({
      x: taus,
      y: taus.map((t) => scale * Math.min(1, t * t)),
      dash: "5 4",
      marker: false,
      label: "min(1, tau^2)",
    });
    if (taus.length >= 2) {
      const small = entries.filter(([k]) => k < 1);
      if (small.length >= 2) {
        const fit = logLogFit(small.map((e) => e[0]), small.map((e) => e[1]));
        p.note(`re-fit small-tau slope ${fit.slope.toFixed(3)}`);
      }
    }
  }
  return document_([p]);
}
