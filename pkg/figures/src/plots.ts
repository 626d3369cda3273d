/** The four figure renderers.
 *
 * Every annotation printed on a figure is formatted straight from the
 * parsed CSV value with `annotate` — the renderer never transforms the
 * numbers it labels.
 */

import { Table, column, numberColumn, requireColumns } from "./csv.js";
import { ScenarioOverlay, boundAt } from "./scenario.js";
import * as svg from "./svg.js";

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { left: 56, right: 16, top: 20, bottom: 44 };

/** Fixed annotation precision used across all figures. */
export function annotate(value: number): string {
  return value.toFixed(3);
}

function plotArea(width = WIDTH, height = HEIGHT) {
  return {
    x: [MARGIN.left, width - MARGIN.right] as [number, number],
    y: [height - MARGIN.bottom, MARGIN.top] as [number, number],
  };
}

const SERIES_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

// -- trajectory --------------------------------------------------------------

export function renderTrajectory(
  trace: Table,
  scenario: ScenarioOverlay | null,
): string {
  requireColumns(trace, ["x", "y"]);
  const xs = numberColumn(trace, "x");
  const ys = numberColumn(trace, "y");

  const allX = [...xs];
  const allY = [...ys];
  if (scenario) {
    allX.push(...scenario.pathX);
    allY.push(...scenario.pathY);
    if (scenario.goal) {
      allX.push(scenario.goal.x);
      allY.push(scenario.goal.y);
    }
  }
  const area = plotArea();
  // equal aspect: pad the smaller span so metres map equally on both axes
  let [xLo, xHi] = svg.extent(allX, 0.08);
  let [yLo, yHi] = svg.extent(allY, 0.08);
  const pxPerX = (area.x[1] - area.x[0]) / (xHi - xLo);
  const pxPerY = (area.y[0] - area.y[1]) / (yHi - yLo);
  if (pxPerX < pxPerY) {
    const grow = ((area.y[0] - area.y[1]) / pxPerX - (yHi - yLo)) / 2;
    yLo -= grow;
    yHi += grow;
  } else {
    const grow = ((area.x[1] - area.x[0]) / pxPerY - (xHi - xLo)) / 2;
    xLo -= grow;
    xHi += grow;
  }
  const sx = svg.linearScale([xLo, xHi], area.x);
  const sy = svg.linearScale([yLo, yHi], area.y);

  const body: string[] = [];
  if (scenario) {
    body.push(corridorOutline(scenario, "lower", sx, sy));
    body.push(corridorOutline(scenario, "upper", sx, sy));
    body.push(
      svg.polyline(
        scenario.pathX.map(sx),
        scenario.pathY.map(sy),
        "stroke:#999;stroke-width:1.2;stroke-dasharray:6 4",
        "reference-path",
      ),
    );
    if (scenario.goal) {
      body.push(goalBox(scenario.goal, sx, sy));
    }
  }
  body.push(
    svg.polyline(
      xs.map(sx),
      ys.map(sy),
      `stroke:${SERIES_COLORS[0]};stroke-width:1.8`,
      "driven-trajectory",
    ),
  );
  body.push(svg.axes(sx, sy, "x [m]", "y [m]"));
  return svg.document(WIDTH, HEIGHT, body);
}

function corridorOutline(
  scenario: ScenarioOverlay,
  which: "lower" | "upper",
  sx: svg.Scale,
  sy: svg.Scale,
): string {
  const { pathX, pathY, pathTheta } = scenario;
  const outX: number[] = [];
  const outY: number[] = [];
  for (let i = 0; i < pathX.length; i++) {
    // offset along the local normal of the reference polyline
    const j = Math.min(i, pathX.length - 2);
    const dx = pathX[j + 1] - pathX[j];
    const dy = pathY[j + 1] - pathY[j];
    const norm = Math.hypot(dx, dy) || 1;
    const off = boundAt(scenario.corridor, which, pathTheta[i]);
    outX.push(pathX[i] + (-dy / norm) * off);
    outY.push(pathY[i] + (dx / norm) * off);
  }
  return svg.polyline(
    outX.map(sx),
    outY.map(sy),
    "stroke:#555;stroke-width:1.4",
    `corridor-${which}`,
  );
}

function goalBox(
  goal: { x: number; y: number; phi: number },
  sx: svg.Scale,
  sy: svg.Scale,
): string {
  const half = 0.35; // metres, footprint marker
  const c = Math.cos(goal.phi);
  const s = Math.sin(goal.phi);
  const corners = [
    [-half, -half],
    [half, -half],
    [half, half],
    [-half, half],
    [-half, -half],
  ].map(([u, v]) => [goal.x + c * u - s * v, goal.y + s * u + c * v]);
  return svg.polyline(
    corners.map((p) => sx(p[0])),
    corners.map((p) => sy(p[1])),
    "stroke:#d62728;stroke-width:1.6",
    "goal-box",
  );
}

// -- weights -----------------------------------------------------------------

export function renderWeights(trace: Table): string {
  requireColumns(trace, ["theta", "q_c_eff", "q_l_eff", "gamma_eff", "mode"]);
  const theta = numberColumn(trace, "theta");
  const series: Array<[string, number[]]> = [
    ["q_c_eff", numberColumn(trace, "q_c_eff")],
    ["q_l_eff", numberColumn(trace, "q_l_eff")],
    ["gamma_eff", numberColumn(trace, "gamma_eff")],
  ];
  const modes = column(trace, "mode");

  const area = plotArea();
  const sx = svg.linearScale(svg.extent(theta, 0.02), area.x);
  const sy = svg.linearScale(
    svg.extent(series.flatMap(([, v]) => v)),
    area.y,
  );

  const body: string[] = [];
  series.forEach(([name, values], i) => {
    body.push(
      svg.polyline(
        theta.map(sx),
        values.map(sy),
        `stroke:${SERIES_COLORS[i]};stroke-width:1.6`,
        name,
      ),
    );
    body.push(
      svg.text(area.x[1] - 8, area.y[1] + 14 * (i + 1), name,
        `font-size:11px;fill:${SERIES_COLORS[i]}`, "end"),
    );
  });

  // mark the first contouring -> cartesian transition, if any
  const flip = modes.findIndex((m, i) => i > 0 && m === "X" && modes[i - 1] === "C");
  if (flip > 0) {
    const px = sx(theta[flip]);
    body.push(svg.line(px, area.y[0], px, area.y[1],
      "stroke:#888;stroke-width:1;stroke-dasharray:3 3"));
    body.push(
      svg.text(px + 4, area.y[1] + 12,
        `mode C→X at θ=${annotate(theta[flip])}`,
        "font-size:10px;fill:#555"),
    );
  }
  body.push(svg.axes(sx, sy, "θ [m]", "effective weight"));
  return svg.document(WIDTH, HEIGHT, body);
}

// -- timeline ----------------------------------------------------------------

export function renderTimeline(trace: Table): string {
  requireColumns(trace, ["t", "v", "delta"]);
  const t = numberColumn(trace, "t");
  const panels: Array<[string, string, number[]]> = [
    ["v", "v [m/s]", numberColumn(trace, "v")],
    ["delta", "δ [rad]", numberColumn(trace, "delta")],
  ];

  const panelHeight = (HEIGHT - MARGIN.top - MARGIN.bottom - 24) / 2;
  const body: string[] = [];
  panels.forEach(([name, label, values], i) => {
    const top = MARGIN.top + i * (panelHeight + 24);
    const sx = svg.linearScale(svg.extent(t, 0.02), [
      MARGIN.left,
      WIDTH - MARGIN.right,
    ]);
    const sy = svg.linearScale(svg.extent(values), [top + panelHeight, top]);
    body.push(
      svg.polyline(t.map(sx), values.map(sy),
        `stroke:${SERIES_COLORS[i]};stroke-width:1.6`, name),
    );
    body.push(svg.axes(sx, sy, i === panels.length - 1 ? "t [s]" : "", label));
    const last = values[values.length - 1];
    body.push(
      svg.text(sx(t[t.length - 1]) - 4, sy(last) - 6,
        `${name}=${annotate(last)}`, "font-size:10px;fill:#555", "end"),
    );
  });
  return svg.document(WIDTH, HEIGHT, body);
}

// -- comparison --------------------------------------------------------------

const COMPARISON_METRICS = [
  "T",
  "delta_rms",
  "delta_dot_rms",
  "a_par_rms",
  "a_perp_rms",
];

export function renderComparison(table: Table): string {
  requireColumns(table, ["strategy", ...COMPARISON_METRICS]);
  const strategies = column(table, "strategy");
  const metricValues = COMPARISON_METRICS.map((name) =>
    column(table, name).map((cell) => (cell === "" ? null : Number(cell))),
  );

  const area = plotArea();
  const allValues = metricValues.flat().filter((v): v is number => v != null);
  const sy = svg.linearScale([0, svg.extent(allValues, 0)[1] * 1.15 || 1],
    area.y);

  const groupWidth = (area.x[1] - area.x[0]) / strategies.length;
  const barWidth = (groupWidth * 0.8) / COMPARISON_METRICS.length;

  const body: string[] = [];
  strategies.forEach((strategy, g) => {
    const groupX = area.x[0] + g * groupWidth + groupWidth * 0.1;
    const bars: string[] = [];
    metricValues.forEach((values, m) => {
      const value = values[g];
      const x = groupX + m * barWidth;
      if (value == null) {
        bars.push(svg.text(x + barWidth / 2, sy(0) - 4, "–",
          "font-size:10px;fill:#999", "middle"));
        return;
      }
      const y = sy(value);
      bars.push(svg.rect(x, y, barWidth * 0.9, sy(0) - y,
        `fill:${SERIES_COLORS[m % SERIES_COLORS.length]};opacity:${
          0.5 + 0.5 * ((m + 1) / COMPARISON_METRICS.length)}`,
        COMPARISON_METRICS[m]));
      bars.push(
        `<g transform="rotate(-90 ${(x + barWidth / 2).toFixed(2)} ${(y - 4).toFixed(2)})">` +
          svg.text(x + barWidth / 2, y - 4, annotate(value),
            "font-size:8px;fill:#333") +
          "</g>",
      );
    });
    body.push(`<g class="group" data-strategy="${strategy}">${bars.join("")}</g>`);
    body.push(svg.text(groupX + groupWidth * 0.4, area.y[0] + 16, strategy,
      "font-size:11px", "middle"));
  });

  // metric legend
  COMPARISON_METRICS.forEach((name, m) => {
    body.push(svg.text(area.x[1] - 8, area.y[1] + 12 * (m + 1), name,
      `font-size:10px;fill:${SERIES_COLORS[m % SERIES_COLORS.length]}`, "end"));
  });
  const axisStyle = "stroke:#333;stroke-width:1";
  body.push(svg.line(area.x[0], sy(0), area.x[1], sy(0), axisStyle));
  body.push(svg.line(area.x[0], area.y[0], area.x[0], area.y[1], axisStyle));
  for (const tick of svg.ticks(sy.domain)) {
    body.push(svg.line(area.x[0] - 4, sy(tick), area.x[0], sy(tick), axisStyle));
    body.push(svg.text(area.x[0] - 6, sy(tick) + 3, String(tick),
      "font-size:10px", "end"));
  }
  return svg.document(WIDTH, HEIGHT, body);
}
