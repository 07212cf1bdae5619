import { writeFileSync } from "fs";

import { numericColumn, readCsv, RenderError, Table } from "./csv.js";
import { chiSquaredOverlay, histogram, overlayRange } from "./stats.js";
import { linearScale, log10Scale, Plot } from "./svg.js";

export type FigureKind =
    | "distance_trace"
    | "norm_histogram"
    | "sine_scan"
    | "orbit_length_panel";

export interface PlotSpec {
    input: string;
    kind: FigureKind;
    out: string;
    /** dimension of the target; required by the chi-squared overlay */
    d?: number;
    /** sine-deviation half width (2/pi * delta band), optional */
    delta?: number;
}

export const EXPECTED_HEADERS: Record<FigureKind, string> = {
    distance_trace: "iter,mean_distance,mean_cum_leapfrog,met_fraction",
    norm_histogram: "chain,iter,norm_sq,stop_reason,orbit_k,grad_evals",
    sine_scan: "k,time,dot_plus_over_d,dot_minus_over_d,sine,deviation",
    orbit_length_panel:
        "chain,iter,stop_reason,orbit_min,orbit_k,L,path_time,norm_sq,max_abs_dH,a_index,grad_evals",
};

function distanceTrace(table: Table): string {
    const steps = numericColumn(table, "mean_cum_leapfrog");
    const distances = numericColumn(table, "mean_distance");
    const positive = distances.filter(v => v > 0);
    if (positive.length === 0) {
        throw new RenderError("distance trace has no positive distances to plot on a log scale");
    }
    const frame = Plot.frame();
    const x = linearScale(0, Math.max(...steps), frame.x[0], frame.x[1]);
    const y = log10Scale(Math.min(...positive), Math.max(...positive), frame.y[0], frame.y[1]);
    const plot = new Plot(x, y, "Synchronously coupled chains", "mean cumulative leapfrog steps", "mean distance");
    const xs: number[] = [];
    const ys: number[] = [];
    for (let i = 0; i < steps.length; i++) {
        if (distances[i] > 0) {
            xs.push(steps[i]);
            ys.push(distances[i]);
        }
    }
    plot.line(xs, ys, "#1f5fa8", 2);
    plot.points(xs, ys, "#1f5fa8");
    return plot.toString();
}

function normHistogram(table: Table, d?: number): string {
    if (d === undefined) {
        throw new RenderError("norm_histogram needs --d for the chi-squared overlay");
    }
    const values = numericColumn(table, "norm_sq");
    const bins = histogram(values, Math.min(60, Math.max(10, Math.floor(Math.sqrt(values.length)))));
    const [lo, hi] = overlayRange(Math.min(...values), Math.max(...values), d);
    const overlay = chiSquaredOverlay(lo, hi, d);
    const peak = Math.max(...overlay.ys, ...bins.map(b => b.density));
    const frame = Plot.frame();
    const x = linearScale(lo, hi, frame.x[0], frame.x[1]);
    const y = linearScale(0, 1.08 * peak, frame.y[0], frame.y[1]);
    const plot = new Plot(x, y, `Histogram of |x|^2 against chi-squared(${d})`, "|x|^2", "density");
    plot.bars(bins, "#7aa6d6");
    plot.line(overlay.xs, overlay.ys, "black", 2);
    plot.legend([
        { label: "sampler histogram", color: "#7aa6d6" },
        { label: "chi-squared density", color: "black" },
    ]);
    return plot.toString();
}

function sineScan(table: Table, delta?: number): string {
    const times = numericColumn(table, "time");
    const plus = numericColumn(table, "dot_plus_over_d");
    const minus = numericColumn(table, "dot_minus_over_d");
    const lo = 0;
    const hi = Math.max(...times, 1e-9);
    const frame = Plot.frame();
    const x = linearScale(lo, hi, frame.x[0], frame.x[1]);
    const extent = Math.max(1.15, ...plus.map(Math.abs), ...minus.map(Math.abs));
    const y = linearScale(-extent, extent, frame.y[0], frame.y[1]);
    const plot = new Plot(x, y, "U-turn dot products against the sine law", "orbit time h(|I|-1)", "dot product / d");
    const curveXs: number[] = [];
    const curveYs: number[] = [];
    for (let i = 0; i <= 512; i++) {
        const t = lo + ((hi - lo) * i) / 512;
        curveXs.push(t);
        curveYs.push(Math.sin(t));
    }
    if (delta !== undefined) {
        const half = (2 / Math.PI) * delta;
        plot.band(curveXs, curveYs.map(v => v + half), curveYs.map(v => v - half), "#888888");
    }
    plot.line(curveXs, curveYs, "#555555", 1.5, "6 4");
    plot.points(times, plus, "#b23a48");
    plot.points(times, minus, "#1f5fa8");
    plot.legend([
        { label: "forward endpoint", color: "#b23a48" },
        { label: "backward endpoint", color: "#1f5fa8" },
        { label: "sin(orbit time)", color: "#555555" },
    ]);
    return plot.toString();
}

function orbitLengthPanel(table: Table): string {
    const iters = numericColumn(table, "iter");
    const ks = numericColumn(table, "orbit_k");
    const lengths = ks.map(k => Math.pow(2, k));
    const frame = Plot.frame();
    const x = linearScale(Math.min(...iters), Math.max(...iters), frame.x[0], frame.x[1]);
    const y = log10Scale(1, Math.max(...lengths) * 1.5, frame.y[0], frame.y[1]);
    const plot = new Plot(x, y, "Selected orbit lengths per transition", "iteration", "orbit length");
    plot.points(iters, lengths, "#1f5fa8", 3);
    return plot.toString();
}

/** Render one figure; the output file is written only on success. */
export function render(spec: PlotSpec): void {
    const table = readCsv(spec.input, EXPECTED_HEADERS[spec.kind]);
    let svg: string;
    switch (spec.kind) {
        case "distance_trace":
            svg = distanceTrace(table);
            break;
        case "norm_histogram":
            svg = normHistogram(table, spec.d);
            break;
        case "sine_scan":
            svg = sineScan(table, spec.delta);
            break;
        case "orbit_length_panel":
            svg = orbitLengthPanel(table);
            break;
        default:
            throw new RenderError(`unknown figure kind: ${spec.kind}`);
    }
    writeFileSync(spec.out, svg);
}
