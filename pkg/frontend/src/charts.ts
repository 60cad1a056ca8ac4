/** Hand-rolled SVG line charts for the dashboard: annotation-ratio budget
 * curves and a cluster-count sparkline. No chart library — the payloads are
 * tiny and the markup stays inspectable in tests. */

import { MetricsRow } from './types.js';

export interface SeriesPoint {
  x: number;
  y: number;
}

export interface ChartOptions {
  width?: number;
  height?: number;
  title?: string;
  xLabel?: string;
  yLabel?: string;
}

const PAD = { top: 22, right: 12, bottom: 30, left: 44 };

export function arGainedSeries(history: MetricsRow[]): SeriesPoint[] {
  return history
    .filter((r) => r.AR !== null && r.gained_TP_ratio !== null)
    .map((r) => ({ x: r.AR as number, y: r.gained_TP_ratio as number }));
}

export function arRankSeries(history: MetricsRow[]): SeriesPoint[] {
  return history
    .filter((r) => r.AR !== null && r.rank1 !== null)
    .map((r) => ({ x: r.AR as number, y: r.rank1 as number }));
}

function extent(values: number[]): [number, number] {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

/** Map data points onto the plot area as an SVG polyline `points` string. */
export function polylinePoints(
  points: SeriesPoint[],
  width: number,
  height: number,
): string {
  const [x0, x1] = extent(points.map((p) => p.x));
  const [y0, y1] = extent(points.map((p) => p.y));
  const plotW = width - PAD.left - PAD.right;
  const plotH = height - PAD.top - PAD.bottom;
  return points
    .map((p) => {
      const px = PAD.left + ((p.x - x0) / (x1 - x0)) * plotW;
      const py = PAD.top + plotH - ((p.y - y0) / (y1 - y0)) * plotH;
      return `${px.toFixed(1)},${py.toFixed(1)}`;
    })
    .join(' ');
}

export function renderLineChart(
  points: SeriesPoint[],
  options: ChartOptions = {},
): string {
  const width = options.width ?? 360;
  const height = options.height ?? 220;
  const head =
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
    `width="${width}" height="${height}" class="chart">`;
  const title = options.title
    ? `<text x="${width / 2}" y="14" text-anchor="middle" class="chart-title">${options.title}</text>`
    : '';
  if (points.length === 0) {
    return (
      head +
      title +
      `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" class="chart-empty">no data yet</text></svg>`
    );
  }
  const axes =
    `<line x1="${PAD.left}" y1="${PAD.top}" x2="${PAD.left}" y2="${height - PAD.bottom}" class="axis"/>` +
    `<line x1="${PAD.left}" y1="${height - PAD.bottom}" x2="${width - PAD.right}" y2="${height - PAD.bottom}" class="axis"/>`;
  const labels =
    (options.xLabel
      ? `<text x="${width / 2}" y="${height - 6}" text-anchor="middle" class="axis-label">${options.xLabel}</text>`
      : '') +
    (options.yLabel
      ? `<text x="12" y="${height / 2}" text-anchor="middle" class="axis-label" transform="rotate(-90 12 ${height / 2})">${options.yLabel}</text>`
      : '');
  const pts = polylinePoints(points, width, height);
  const line = `<polyline points="${pts}" fill="none" class="series"/>`;
  const dots = pts
    .split(' ')
    .map((xy) => {
      const [cx, cy] = xy.split(',');
      return `<circle cx="${cx}" cy="${cy}" r="2.5" class="dot"/>`;
    })
    .join('');
  return head + title + axes + labels + line + dots + '</svg>';
}

export function renderSparkline(
  values: number[],
  width = 140,
  height = 32,
): string {
  const head =
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
    `width="${width}" height="${height}" class="sparkline">`;
  if (values.length === 0) return head + '</svg>';
  const [lo, hi] = extent(values);
  const step = values.length > 1 ? width / (values.length - 1) : 0;
  const pts = values
    .map((v, i) => {
      const x = values.length > 1 ? i * step : width / 2;
      const y = height - 3 - ((v - lo) / (hi - lo)) * (height - 6);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(' ');
  return head + `<polyline points="${pts}" fill="none" class="series"/></svg>`;
}
