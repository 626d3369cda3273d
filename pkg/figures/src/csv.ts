/** Strict CSV reading for the planner's trace/comparison artifacts. */

export class SchemaMismatch extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaMismatch";
  }
}

export interface Table {
  /** Source label used in error messages (usually the file name). */
  source: string;
  columns: string[];
  rows: string[][];
}

/**
 * Parse simple comma-separated text (no quoting — the planner never
 * emits quoted cells). Every row must have exactly the header's width.
 */
export function parseCsv(text: string, source: string): Table {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaMismatch(`${source}: empty file`);
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== columns.length) {
      throw new SchemaMismatch(
        `${source}: row ${i + 1} has ${cells.length} cells, ` +
          `expected ${columns.length}`,
      );
    }
    return cells;
  });
  return { source, columns, rows };
}

export function requireColumns(table: Table, names: string[]): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new SchemaMismatch(`${table.source}: missing column '${name}'`);
    }
  }
}

export function column(table: Table, name: string): string[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaMismatch(`${table.source}: missing column '${name}'`);
  }
  return table.rows.map((row) => row[idx]);
}

export function numberColumn(table: Table, name: string): number[] {
  return column(table, name).map((cell, i) => {
    const value = Number(cell);
    if (cell === "" || !Number.isFinite(value)) {
      throw new SchemaMismatch(
        `${table.source}: column '${name}' row ${i + 1} is not a number: ` +
          `'${cell}'`,
      );
    }
    return value;
  });
}
