// Minimal deterministic SVG plotting: linear/log axes, lines, points, bars,
// and shaded bands.  No DOM, no dependencies.

export interface Scale {
    (value: number): number;
    ticks(): number[];
}

function linearTicks(lo: number, hi: number, count = 6): number[] {
    if (hi <= lo) return [lo];
    const rawStep = (hi - lo) / count;
    const power = Math.pow(10, Math.floor(Math.log10(rawStep)));
    const candidates = [1, 2, 5, 10].map(m => m * power);
    const step = candidates.find(c => (hi - lo) / c <= count) ?? candidates[3];
    const ticks: number[] = [];
    for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12 * step; t += step) {
        ticks.push(Number(t.toPrecision(12)));
    }
    return ticks;
}

export function linearScale(lo: number, hi: number, pixelLo: number, pixelHi: number): Scale {
    const span = hi > lo ? hi - lo : 1;
    const scale = ((value: number) =>
        pixelLo + ((value - lo) / span) * (pixelHi - pixelLo)) as Scale;
    scale.ticks = () => linearTicks(lo, hi);
    return scale;
}

export function log10Scale(lo: number, hi: number, pixelLo: number, pixelHi: number): Scale {
    const logLo = Math.log10(lo);
    const logHi = Math.log10(hi);
    const span = logHi > logLo ? logHi - logLo : 1;
    const scale = ((value: number) =>
        pixelLo + ((Math.log10(value) - logLo) / span) * (pixelHi - pixelLo)) as Scale;
    scale.ticks = () => {
        const ticks: number[] = [];
        for (let e = Math.ceil(logLo); e <= Math.floor(logHi); e++) {
            ticks.push(Math.pow(10, e));
        }
        return ticks.length > 0 ? ticks : [lo, hi];
    };
    return scale;
}

const WIDTH = 860;
const HEIGHT = 560;
const MARGIN = { left: 72, right: 24, top: 36, bottom: 56 };

function fmt(value: number): string {
    if (value === 0) return "0";
    const abs = Math.abs(value);
    if (abs >= 1e5 || abs < 1e-3) return value.toExponential(1);
    return Number(value.toPrecision(6)).toString();
}

export class Plot {
    private parts: string[] = [];

    constructor(
        readonly x: Scale,
        readonly y: Scale,
        title: string,
        xLabel: string,
        yLabel: string
    ) {
        this.parts.push(
            `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
            `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
            `<text x="${WIDTH / 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="16">${title}</text>`,
            `<text x="${WIDTH / 2}" y="${HEIGHT - 12}" text-anchor="middle" font-family="sans-serif" font-size="13">${xLabel}</text>`,
            `<text x="18" y="${HEIGHT / 2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 ${HEIGHT / 2})">${yLabel}</text>`
        );
        this.axes();
    }

    static frame(): { x: [number, number]; y: [number, number] } {
        return {
            x: [MARGIN.left, WIDTH - MARGIN.right],
            y: [HEIGHT - MARGIN.bottom, MARGIN.top],
        };
    }

    private axes(): void {
        const x0 = MARGIN.left;
        const x1 = WIDTH - MARGIN.right;
        const y0 = HEIGHT - MARGIN.bottom;
        const y1 = MARGIN.top;
        this.parts.push(
            `<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`,
            `<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`
        );
        for (const tick of this.x.ticks()) {
            const px = this.x(tick);
            if (px < x0 - 0.5 || px > x1 + 0.5) continue;
            this.parts.push(
                `<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="black"/>`,
                `<text x="${px}" y="${y0 + 20}" text-anchor="middle" font-family="sans-serif" font-size="11">${fmt(tick)}</text>`
            );
        }
        for (const tick of this.y.ticks()) {
            const py = this.y(tick);
            if (py > y0 + 0.5 || py < y1 - 0.5) continue;
            this.parts.push(
                `<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`,
                `<text x="${x0 - 8}" y="${py + 4}" text-anchor="end" font-family="sans-serif" font-size="11">${fmt(tick)}</text>`
            );
        }
    }

    line(xs: number[], ys: number[], color: string, width = 1.5, dash = ""): void {
        const coords: string[] = [];
        for (let i = 0; i < xs.length; i++) {
            coords.push(`${this.x(xs[i]).toFixed(2)},${this.y(ys[i]).toFixed(2)}`);
        }
        const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
        this.parts.push(
            `<polyline points="${coords.join(" ")}" fill="none" stroke="${color}" stroke-width="${width}"${dashAttr}/>`
        );
    }

    points(xs: number[], ys: number[], color: string, radius = 2.4): void {
        for (let i = 0; i < xs.length; i++) {
            this.parts.push(
                `<circle cx="${this.x(xs[i]).toFixed(2)}" cy="${this.y(ys[i]).toFixed(2)}" r="${radius}" fill="${color}" fill-opacity="0.65"/>`
            );
        }
    }

    bars(bins: { lo: number; hi: number; density: number }[], color: string): void {
        const base = this.y(0);
        for (const bin of bins) {
            const left = this.x(bin.lo);
            const top = this.y(bin.density);
            const w = this.x(bin.hi) - left;
            const h = base - top;
            if (h <= 0) continue;
            this.parts.push(
                `<rect x="${left.toFixed(2)}" y="${top.toFixed(2)}" width="${w.toFixed(2)}" height="${h.toFixed(2)}" fill="${color}" fill-opacity="0.55" stroke="none"/>`
            );
        }
    }

    band(xs: number[], upper: number[], lower: number[], color: string): void {
        const forward = xs.map((x, i) => `${this.x(x).toFixed(2)},${this.y(upper[i]).toFixed(2)}`);
        const backward = xs
            .map((x, i) => `${this.x(x).toFixed(2)},${this.y(lower[i]).toFixed(2)}`)
            .reverse();
        this.parts.push(
            `<polygon points="${forward.concat(backward).join(" ")}" fill="${color}" fill-opacity="0.2" stroke="none"/>`
        );
    }

    legend(entries: { label: string; color: string }[]): void {
        entries.forEach((entry, i) => {
            const y = MARGIN.top + 16 + 18 * i;
            const x = WIDTH - MARGIN.right - 190;
            this.parts.push(
                `<rect x="${x}" y="${y - 9}" width="12" height="12" fill="${entry.color}"/>`,
                `<text x="${x + 18}" y="${y + 2}" font-family="sans-serif" font-size="12">${entry.label}</text>`
            );
        });
    }

    toString(): string {
        return this.parts.join("\n") + "\n</svg>\n";
    }
}
