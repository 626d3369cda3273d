/** Minimal string-templated SVG building blocks. */

export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = domain;
  fn.range = range;
  return fn;
}

export function extent(values: number[], pad = 0.05): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  const margin = (hi - lo || 1) * pad;
  return [lo - margin, hi + margin];
}

export function escapeText(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

export function polyline(
  xs: number[],
  ys: number[],
  style: string,
  cls = "",
): string {
  const pts = xs.map((x, i) => `${x.toFixed(2)},${ys[i].toFixed(2)}`).join(" ");
  const klass = cls ? ` class="${cls}"` : "";
  return `<polyline${klass} points="${pts}" style="fill:none;${style}"/>`;
}

export function text(
  x: number,
  y: number,
  value: string,
  style = "font-size:11px",
  anchor = "start",
): string {
  return (
    `<text x="${x.toFixed(2)}" y="${y.toFixed(2)}" ` +
    `text-anchor="${anchor}" style="${style};font-family:sans-serif">` +
    `${escapeText(value)}</text>`
  );
}

export function rect(
  x: number,
  y: number,
  w: number,
  h: number,
  style: string,
  cls = "",
): string {
  const klass = cls ? ` class="${cls}"` : "";
  return (
    `<rect${klass} x="${x.toFixed(2)}" y="${y.toFixed(2)}" ` +
    `width="${w.toFixed(2)}" height="${h.toFixed(2)}" style="${style}"/>`
  );
}

export function line(
  x1: number,
  y1: number,
  x2: number,
  y2: number,
  style: string,
): string {
  return (
    `<line x1="${x1.toFixed(2)}" y1="${y1.toFixed(2)}" ` +
    `x2="${x2.toFixed(2)}" y2="${y2.toFixed(2)}" style="${style}"/>`
  );
}

/** Evenly spaced round-ish tick values across a domain. */
export function ticks(domain: [number, number], count = 5): number[] {
  const [lo, hi] = domain;
  const span = hi - lo || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const candidates = [step, 2 * step, 5 * step, 10 * step];
  const chosen =
    candidates.find((s) => span / s <= count + 1) ?? candidates[3];
  const out: number[] = [];
  for (let v = Math.ceil(lo / chosen) * chosen; v <= hi + 1e-12; v += chosen) {
    out.push(Number(v.toFixed(10)));
  }
  return out;
}

export function axes(
  xScale: Scale,
  yScale: Scale,
  xLabel: string,
  yLabel: string,
): string {
  const [x0, x1] = xScale.range;
  const [y0, y1] = yScale.range; // y0 is the bottom (larger pixel value)
  const parts: string[] = [];
  const axisStyle = "stroke:#333;stroke-width:1";
  parts.push(line(x0, y0, x1, y0, axisStyle));
  parts.push(line(x0, y0, x0, y1, axisStyle));
  for (const t of ticks(xScale.domain)) {
    const px = xScale(t);
    parts.push(line(px, y0, px, y0 + 4, axisStyle));
    parts.push(text(px, y0 + 16, trimNumber(t), "font-size:10px", "middle"));
  }
  for (const t of ticks(yScale.domain)) {
    const py = yScale(t);
    parts.push(line(x0 - 4, py, x0, py, axisStyle));
    parts.push(text(x0 - 6, py + 3, trimNumber(t), "font-size:10px", "end"));
  }
  parts.push(text((x0 + x1) / 2, y0 + 30, xLabel, "font-size:11px", "middle"));
  parts.push(
    `<g transform="rotate(-90 14 ${(y0 + y1) / 2})">` +
      text(14, (y0 + y1) / 2, yLabel, "font-size:11px", "middle") +
      "</g>",
  );
  return parts.join("\n");
}

function trimNumber(v: number): string {
  return Math.abs(v) >= 1000 ? v.toFixed(0) : String(Number(v.toFixed(4)));
}

export function document(
  width: number,
  height: number,
  body: string[],
): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
    `height="${height}" viewBox="0 0 ${width} ${height}">\n` +
    `<rect width="${width}" height="${height}" style="fill:white"/>\n` +
    body.join("\n") +
    "\n</svg>\n"
  );
}
