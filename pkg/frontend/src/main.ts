import { RenderError } from "./csv.js";
import { EXPECTED_HEADERS, FigureKind, PlotSpec, render } from "./render.js";

const USAGE =
    "usage: render --input <csv> --kind <distance_trace|norm_histogram|sine_scan|orbit_length_panel> --out <svg> [--d <dim>] [--delta <delta>]";

export function runCli(argv: string[]): number {
    const flags = new Map<string, string>();
    for (let i = 0; i < argv.length; i += 2) {
        const key = argv[i];
        const value = argv[i + 1];
        if (!key.startsWith("--") || value === undefined) {
            console.error(USAGE);
            return 2;
        }
        flags.set(key.slice(2), value);
    }
    const input = flags.get("input");
    const kind = flags.get("kind");
    const out = flags.get("out");
    if (!input || !kind || !out) {
        console.error(USAGE);
        return 2;
    }
    if (!(kind in EXPECTED_HEADERS)) {
        console.error(`unknown figure kind: ${kind}\n${USAGE}`);
        return 2;
    }
    const spec: PlotSpec = { input, kind: kind as FigureKind, out };
    if (flags.has("d")) spec.d = Number(flags.get("d"));
    if (flags.has("delta")) spec.delta = Number(flags.get("delta"));
    try {
        render(spec);
    } catch (err) {
        if (err instanceof RenderError) {
            console.error(`render failed: ${err.message}`);
            return 1;
        }
        throw err;
    }
    return 0;
}

const isMain = process.argv[1] !== undefined && import.meta.url.endsWith(
    process.argv[1].split("/").pop() ?? ""
);
if (isMain) {
    process.exit(runCli(process.argv.slice(2)));
}
