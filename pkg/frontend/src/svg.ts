/** Minimal hand-rolled SVG plotting: axes, ticks, polylines, scatter, text.
 *
 * No DOM or canvas dependency; figures are static SVG documents. Log axes
 * are handled by transforming values before mapping to pixels.
 */

export interface PanelSpec {
  title?: string;
  xlabel?: string;
  ylabel?: string;
  xlog?: boolean;
  ylog?: boolean;
}

export interface Series {
  x: number[];
  y: number[];
  color?: string;
  width?: number;
  dash?: string;
  marker?: boolean;
  label?: string;
}

const WIDTH = 560;
const HEIGHT = 360;
const MARGIN = { left: 64, right: 16, top: 34, bottom: 46 };
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function ticks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const mult = [1, 2, 5, 10].find((m) => span / (step * m) <= n + 1) ?? 10;
  const s = step * mult;
  const start = Math.ceil(lo / s) * s;
  const out: number[] = [];
  for (let t = start; t <= hi + 1e-12 * span; t += s) out.push(t);
  return out;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
  return String(parseFloat(v.toPrecision(4)));
}

export class Panel {
  private body: string[] = [];
  private notes: string[] = [];
  private seriesList: Series[] = [];

  constructor(private spec: PanelSpec) {}

  add(series: Series): void {
    this.seriesList.push(series);
  }

  note(text: string): void {
    this.notes.push(text);
  }

  private tf(v: number, log: boolean): number {
    return log ? Math.log10(v) : v;
  }

  render(): string {
    const { xlog = false, ylog = false } = this.spec;
    const xs: number[] = [];
    const ys: number[] = [];
    for (const s of this.seriesList) {
      for (let i = 0; i < s.x.length; i++) {
        const xv = this.tf(s.x[i], xlog);
        const yv = this.tf(s.y[i], ylog);
        if (Number.isFinite(xv) && Number.isFinite(yv)) {
          xs.push(xv);
          ys.push(yv);
        }
      }
    }
    const plotW = WIDTH - MARGIN.left - MARGIN.right;
    const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
    if (xs.length === 0) {
      return (
        `<g>${this.frame(plotW, plotH)}` +
        `<text x="${MARGIN.left + plotW / 2}" y="${MARGIN.top + plotH / 2}" ` +
        `text-anchor="middle" font-size="15" fill="#777">no data</text></g>`
      );
    }
    let xlo = Math.min(...xs);
    let xhi = Math.max(...xs);
    let ylo = Math.min(...ys);
    let yhi = Math.max(...ys);
    if (xhi === xlo) {
      xlo -= 0.5;
      xhi += 0.5;
    }
    if (yhi === ylo) {
      ylo -= 0.5;
      yhi += 0.5;
    }
    const padY = 0.06 * (yhi - ylo);
    ylo -= padY;
    yhi += padY;
    const px = (v: number) => MARGIN.left + ((v - xlo) / (xhi - xlo)) * plotW;
    const py = (v: number) => MARGIN.top + plotH - ((v - ylo) / (yhi - ylo)) * plotH;

    const parts: string[] = [this.frame(plotW, plotH)];
    for (const t of ticks(xlo, xhi)) {
      const X = px(t);
      parts.push(
        `<line x1="${X}" y1="${MARGIN.top + plotH}" x2="${X}" y2="${MARGIN.top + plotH + 4}" stroke="#333"/>`,
        `<text x="${X}" y="${MARGIN.top + plotH + 17}" text-anchor="middle" font-size="10">` +
          esc(xlog ? `1e${fmt(t)}` : fmt(t)) +
          `</text>`
      );
    }
    for (const t of ticks(ylo, yhi)) {
      const Y = py(t);
      parts.push(
        `<line x1="${MARGIN.left - 4}" y1="${Y}" x2="${MARGIN.left}" y2="${Y}" stroke="#333"/>`,
        `<text x="${MARGIN.left - 7}" y="${Y + 3}" text-anchor="end" font-size="10">` +
          esc(ylog ? `1e${fmt(t)}` : fmt(t)) +
          `</text>`
      );
    }
    this.seriesList.forEach((s, k) => {
      const color = s.color ?? COLORS[k % COLORS.length];
      const pts: string[] = [];
      for (let i = 0; i < s.x.length; i++) {
        const xv = this.tf(s.x[i], xlog);
        const yv = this.tf(s.y[i], ylog);
        if (Number.isFinite(xv) && Number.isFinite(yv)) {
          pts.push(`${px(xv).toFixed(2)},${py(yv).toFixed(2)}`);
        }
      }
      if (pts.length > 1) {
        parts.push(
          `<polyline points="${pts.join(" ")}" fill="none" stroke="${color}" ` +
            `stroke-width="${s.width ?? 1.5}"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`
        );
      }
      if (s.marker ?? pts.length <= 40) {
        for (const p of pts) {
          const [X, Y] = p.split(",");
          parts.push(`<circle cx="${X}" cy="${Y}" r="2.6" fill="${color}"/>`);
        }
      }
      if (s.label) {
        const Y = MARGIN.top + 14 + 14 * k;
        parts.push(
          `<line x1="${WIDTH - MARGIN.right - 110}" y1="${Y - 4}" x2="${WIDTH - MARGIN.right - 92}" y2="${Y - 4}" stroke="${color}" stroke-width="2"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`,
          `<text x="${WIDTH - MARGIN.right - 87}" y="${Y}" font-size="10">${esc(s.label)}</text>`
        );
      }
    });
    this.notes.forEach((n, k) => {
      parts.push(
        `<text x="${MARGIN.left + 8}" y="${MARGIN.top + 16 + 14 * k}" font-size="11" fill="#333">${esc(n)}</text>`
      );
    });
    return `<g>${parts.join("")}</g>`;
  }

  private frame(plotW: number, plotH: number): string {
    const parts = [
      `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333"/>`,
    ];
    if (this.spec.title) {
      parts.push(
        `<text x="${MARGIN.left + plotW / 2}" y="${MARGIN.top - 12}" text-anchor="middle" font-size="13" font-weight="bold">${esc(this.spec.title)}</text>`
      );
    }
    if (this.spec.xlabel) {
      parts.push(
        `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 10}" text-anchor="middle" font-size="11">${esc(this.spec.xlabel)}</text>`
      );
    }
    if (this.spec.ylabel) {
      parts.push(
        `<text x="16" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-size="11" transform="rotate(-90 16 ${MARGIN.top + plotH / 2})">${esc(this.spec.ylabel)}</text>`
      );
    }
    return parts.join("");
  }
}

/** Stack panels vertically into one SVG document. */
export function document_(panels: Panel[]): string {
  const H = HEIGHT * panels.length;
  const body = panels
    .map((p, i) => `<g transform="translate(0 ${i * HEIGHT})">${p.render()}</g>`)
    .join("");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${H}" ` +
    `viewBox="0 0 ${WIDTH} ${H}" font-family="Helvetica, Arial, sans-serif">` +
    `<rect width="${WIDTH}" height="${H}" fill="white"/>${body}</svg>`
  );
}
