#!/usr/bin/env node
/** figures <kind> --in <csv> [--scenario <json>] --out <svg> */

import { readFileSync, writeFileSync } from "node:fs";

import { SchemaMismatch, parseCsv } from "./csv.js";
import {
  renderComparison,
  renderTimeline,
  renderTrajectory,
  renderWeights,
} from "./plots.js";
import { parseScenario } from "./scenario.js";

export const KINDS = ["trajectory", "weights", "timeline", "comparison"] as const;
export type Kind = (typeof KINDS)[number];

interface Args {
  kind: Kind;
  input: string;
  output: string;
  scenario: string | null;
}

export function parseArgs(argv: string[]): Args {
  const positional: string[] = [];
  let input: string | null = null;
  let output: string | null = null;
  let scenario: string | null = null;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`${arg}: missing value`);
      return argv[++i];
    };
    if (arg === "--in") input = next();
    else if (arg === "--out") output = next();
    else if (arg === "--scenario") scenario = next();
    else if (arg.startsWith("--")) throw new Error(`unknown option ${arg}`);
    else positional.push(arg);
  }
  if (positional.length !== 1 || !KINDS.includes(positional[0] as Kind)) {
    throw new Error(`expected one plot kind (${KINDS.join(" | ")})`);
  }
  if (!input || !output) {
    throw new Error("--in and --out are required");
  }
  return { kind: positional[0] as Kind, input, output, scenario };
}

export function render(args: Args): string {
  const table = parseCsv(readFileSync(args.input, "utf-8"), args.input);
  switch (args.kind) {
    case "trajectory": {
      const overlay = args.scenario
        ? parseScenario(readFileSync(args.scenario, "utf-8"), args.scenario)
        : null;
      return renderTrajectory(table, overlay);
    }
    case "weights":
      return renderWeights(table);
    case "timeline":
      return renderTimeline(table);
    case "comparison":
      return renderComparison(table);
  }
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    process.stderr.write(`usage error: ${(err as Error).message}\n`);
    return 2;
  }
  try {
    writeFileSync(args.output, render(args));
  } catch (err) {
    if (err instanceof SchemaMismatch) {
      process.stderr.write(`error: ${err.message}\n`);
      return 2;
    }
    process.stderr.write(`error: ${err}\n`);
    return 1;
  }
  return 0;
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("figures")) {
  process.exit(main(process.argv.slice(2)));
}
