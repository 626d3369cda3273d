/** Reading the resolved scenario file for plot overlays. */

import { SchemaMismatch } from "./csv.js";

export interface CorridorSpec {
  thetaBreakpoints: number[];
  lower: number[];
  upper: number[];
}

export interface ScenarioOverlay {
  /** Reference polyline: x, y, and cumulative arc length per vertex. */
  pathX: number[];
  pathY: number[];
  pathTheta: number[];
  corridor: CorridorSpec;
  goal: { x: number; y: number; phi: number } | null;
}

export function parseScenario(jsonText: string, source: string): ScenarioOverlay {
  let doc: any;
  try {
    doc = JSON.parse(jsonText);
  } catch (err) {
    throw new SchemaMismatch(`${source}: invalid JSON (${err})`);
  }
  const waypoints = doc?.path?.waypoints;
  if (!Array.isArray(waypoints) || waypoints.length === 0) {
    throw new SchemaMismatch(`${source}: missing path.waypoints`);
  }

  const pathX: number[] = [];
  const pathY: number[] = [];
  const pathTheta: number[] = [];
  let theta = 0;
  for (const leg of waypoints) {
    for (const point of leg) {
      const [x, y] = point.map(Number);
      if (pathX.length > 0) {
        const last = pathX.length - 1;
        theta += Math.hypot(x - pathX[last], y - pathY[last]);
      }
      pathX.push(x);
      pathY.push(y);
      pathTheta.push(theta);
    }
  }

  const corr = doc.corridor;
  let corridor: CorridorSpec;
  if (corr && typeof corr.half_width === "number") {
    corridor = {
      thetaBreakpoints: [0, theta],
      lower: [-corr.half_width, -corr.half_width],
      upper: [corr.half_width, corr.half_width],
    };
  } else if (corr && Array.isArray(corr.theta_breakpoints)) {
    corridor = {
      thetaBreakpoints: corr.theta_breakpoints.map(Number),
      lower: corr.lower.map(Number),
      upper: corr.upper.map(Number),
    };
  } else {
    throw new SchemaMismatch(`${source}: missing corridor`);
  }

  let goal: ScenarioOverlay["goal"] = null;
  if (doc.goal != null) {
    const pose = doc.goal.pose;
    if (!Array.isArray(pose) || pose.length !== 3) {
      throw new SchemaMismatch(`${source}: goal.pose must be [x, y, phi]`);
    }
    goal = { x: Number(pose[0]), y: Number(pose[1]), phi: Number(pose[2]) };
  }

  return { pathX, pathY, pathTheta, corridor, goal };
}

/** Piecewise-linear corridor bound at a path position (clamped outside). */
export function boundAt(
  corridor: CorridorSpec,
  which: "lower" | "upper",
  theta: number,
): number {
  const bp = corridor.thetaBreakpoints;
  const values = corridor[which];
  if (theta <= bp[0]) return values[0];
  for (let i = 1; i < bp.length; i++) {
    if (theta <= bp[i]) {
      const f = (theta - bp[i - 1]) / (bp[i] - bp[i - 1] || 1);
      return values[i - 1] + f * (values[i] - values[i - 1]);
    }
  }
  return values[values.length - 1];
}
