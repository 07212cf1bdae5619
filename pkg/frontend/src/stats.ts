// Closed-form overlays: the chi-squared density for the norm histogram and
// numeric integration used to sanity-check it.

const LANCZOS_G = 7;
const LANCZOS_COEF = [
    0.99999999999980993, 676.5203681218851, -1259.1392167224028,
    771.32342877765313, -176.61502916214059, 12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7,
];

export function logGamma(z: number): number {
    if (z < 0.5) {
        // reflection formula
        return Math.log(Math.PI / Math.sin(Math.PI * z)) - logGamma(1 - z);
    }
    z -= 1;
    let x = LANCZOS_COEF[0];
    for (let i = 1; i < LANCZOS_G + 2; i++) {
        x += LANCZOS_COEF[i] / (z + i);
    }
    const t = z + LANCZOS_G + 0.5;
    return 0.5 * Math.log(2 * Math.PI) + (z + 0.5) * Math.log(t) - t + Math.log(x);
}

/** Density of the chi-squared law with d degrees of freedom. */
export function chiSquaredPdf(x: number, d: number): number {
    if (x <= 0) return 0;
    const half = d / 2;
    const logPdf = (half - 1) * Math.log(x) - x / 2 - half * Math.LN2 - logGamma(half);
    return Math.exp(logPdf);
}

export interface Curve {
    xs: number[];
    ys: number[];
}

/** Sample the chi-squared density on [lo, hi]. */
export function chiSquaredOverlay(lo: number, hi: number, d: number, points = 513): Curve {
    const xs: number[] = [];
    const ys: number[] = [];
    for (let i = 0; i < points; i++) {
        const x = lo + ((hi - lo) * i) / (points - 1);
        xs.push(x);
        ys.push(chiSquaredPdf(x, d));
    }
    return { xs, ys };
}

/** Trapezoid rule over a sampled curve. */
export function integrate(curve: Curve): number {
    let total = 0;
    for (let i = 1; i < curve.xs.length; i++) {
        total += 0.5 * (curve.ys[i] + curve.ys[i - 1]) * (curve.xs[i] - curve.xs[i - 1]);
    }
    return total;
}

/** The range the histogram overlay is drawn on: the data range widened to
 * cover the bulk of the reference law (six standard deviations). */
export function overlayRange(dataMin: number, dataMax: number, d: number): [number, number] {
    const sigma = Math.sqrt(2 * d);
    return [Math.max(0, Math.min(dataMin, d - 6 * sigma)), Math.max(dataMax, d + 6 * sigma)];
}

export interface Bin {
    lo: number;
    hi: number;
    density: number;
}

/** Density-normalized histogram with equal-width bins. */
export function histogram(values: number[], binCount: number): Bin[] {
    const lo = Math.min(...values);
    const hi = Math.max(...values);
    const width = hi > lo ? (hi - lo) / binCount : 1;
    const counts = new Array<number>(binCount).fill(0);
    for (const value of values) {
        const idx = Math.min(Math.floor((value - lo) / width), binCount - 1);
        counts[idx] += 1;
    }
    return counts.map((count, i) => ({
        lo: lo + i * width,
        hi: lo + (i + 1) * width,
        density: count / (values.length * width),
    }));
}
