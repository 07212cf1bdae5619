import { readFileSync } from "fs";

export class RenderError extends Error {}

export interface Table {
    header: string;
    columns: string[];
    rows: string[][];
}

/** Read a CSV whose header must match the documented one exactly. */
export function readCsv(path: string, expectedHeader: string): Table {
    let text: string;
    try {
        text = readFileSync(path, "utf8");
    } catch {
        throw new RenderError(`cannot read input CSV: ${path}`);
    }
    const lines = text.split(/\r?\n/).filter(line => line.length > 0);
    if (lines.length === 0) {
        throw new RenderError(`input CSV is empty: ${path}`);
    }
    if (lines[0] !== expectedHeader) {
        throw new RenderError(
            `unexpected CSV header in ${path}\n  expected: ${expectedHeader}\n  found:    ${lines[0]}`
        );
    }
    const columns = expectedHeader.split(",");
    const rows = lines.slice(1).map(line => line.split(","));
    for (const row of rows) {
        if (row.length !== columns.length) {
            throw new RenderError(`malformed CSV row in ${path}: ${row.join(",")}`);
        }
    }
    if (rows.length === 0) {
        throw new RenderError(`CSV has a header but no data rows: ${path}`);
    }
    return { header: expectedHeader, columns, rows };
}

export function numericColumn(table: Table, name: string): number[] {
    const idx = table.columns.indexOf(name);
    if (idx < 0) {
        throw new RenderError(`missing column ${name}`);
    }
    return table.rows.map(row => {
        const value = Number(row[idx]);
        if (!Number.isFinite(value)) {
            throw new RenderError(`non-numeric value in column ${name}: ${row[idx]}`);
        }
        return value;
    });
}
