/** Least-squares fits used for the annotation overlays.
 *
 * Slopes and rates shown in the figures are always re-fitted here from the
 * raw CSV, independently of whatever the CLI reported; both values are
 * displayed so a disagreement is visible at a glance.
 */

export interface LineFit {
  slope: number;
  intercept: number;
}

export function linearFit(x: number[], y: number[]): LineFit {
  const n = x.length;
  if (n < 2) throw new Error("need at least two points to fit a line");
  let sx = 0,
    sy = 0,
    sxx = 0,
    sxy = 0;
  for (let i = 0; i < n; i++) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const denom = n * sxx - sx * sx;
  const slope = (n * sxy - sx * sy) / denom;
  return { slope, intercept: (sy - slope * sx) / n };
}

/** slope of log(y) against log(x), ignoring non-positive entries */
export function logLogFit(x: number[], y: number[]): LineFit {
  const lx: number[] = [];
  const ly: number[] = [];
  for (let i = 0; i < x.length; i++) {
    if (x[i] > 0 && y[i] > 0) {
      lx.push(Math.log(x[i]));
      ly.push(Math.log(y[i]));
    }
  }
  return linearFit(lx, ly);
}

/** exponential decay rate of y(x) on a window: -d log(y)/dx */
export function decayRate(x: number[], y: number[]): LineFit {
  const lx: number[] = [];
  const ly: number[] = [];
  for (let i = 0; i < x.length; i++) {
    if (y[i] > 1e-280) {
      lx.push(x[i]);
      ly.push(Math.log(y[i]));
    }
  }
  return linearFit(lx, ly);
}
