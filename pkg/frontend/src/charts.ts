import type { EstimateRecord } from './types';

export interface ChartPoint {
  gamma: number;
  value: number;
  lowConfidence: boolean;
  pending: boolean;
}

/** Project estimate records onto chart points for one metric. Values are
 * passed through verbatim; records whose value is null are dropped. */
export function chartPoints(
  records: EstimateRecord[],
  key: 'p_hat' | 'recall_hat',
): ChartPoint[] {
  const points: ChartPoint[] = [];
  for (const rec of records) {
    const value = rec[key];
    if (value === null || value === undefined) continue;
    points.push({
      gamma: rec.gamma,
      value,
      lowConfidence: rec.flags.includes('low-confidence'),
      pending:
        rec.flags.includes('precision-pending') ||
        rec.flags.includes('recall-pending'),
    });
  }
  points.sort((a, b) => a.gamma - b.gamma);
  return points;
}

const WIDTH = 360;
const HEIGHT = 180;
const PAD = 28;

function xOf(gamma: number, gammas: number[]): number {
  const lo = Math.min(...gammas);
  const hi = Math.max(...gammas);
  if (hi === lo) return WIDTH / 2;
  return PAD + ((gamma - lo) / (hi - lo)) * (WIDTH - 2 * PAD);
}

function yOf(value: number): number {
  return HEIGHT - PAD - value * (HEIGHT - 2 * PAD);
}

/** Render one estimate-vs-gamma line chart as an SVG string. Each marker
 * carries the exact API value in a data-value attribute; low-confidence
 * points get a warning glyph. */
export function renderChart(
  records: EstimateRecord[],
  key: 'p_hat' | 'recall_hat',
  title: string,
): string {
  const points = chartPoints(records, key);
  const gammas = points.map((p) => p.gamma);
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${WIDTH} ${HEIGHT}" class="chart" role="img" aria-label="${title}">`,
    `<text x="${WIDTH / 2}" y="14" text-anchor="middle" class="chart-title">${title}</text>`,
    `<line x1="${PAD}" y1="${HEIGHT - PAD}" x2="${WIDTH - PAD}" y2="${HEIGHT - PAD}" class="axis"/>`,
    `<line x1="${PAD}" y1="${PAD}" x2="${PAD}" y2="${HEIGHT - PAD}" class="axis"/>`,
  ];
  if (points.length > 1) {
    const path = points
      .map((p) => `${xOf(p.gamma, gammas).toFixed(1)},${yOf(p.value).toFixed(1)}`)
      .join(' ');
    parts.push(`<polyline points="${path}" class="series"/>`);
  }
  for (const p of points) {
    const x = xOf(p.gamma, gammas);
    const y = yOf(p.value);
    const cls = p.pending ? 'point pending' : 'point';
    parts.push(
      `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="4" class="${cls}" ` +
        `data-gamma="${p.gamma}" data-value="${p.value}"/>`,
    );
    parts.push(
      `<text x="${x.toFixed(1)}" y="${(y - 8).toFixed(1)}" text-anchor="middle" ` +
        `class="point-label">${p.value.toFixed(3)}</text>`,
    );
    if (p.lowConfidence) {
      parts.push(
        `<text x="${(x + 8).toFixed(1)}" y="${(y + 4).toFixed(1)}" ` +
          `class="warning" data-gamma="${p.gamma}">⚠</text>`,
      );
    }
    parts.push(
      `<text x="${x.toFixed(1)}" y="${HEIGHT - PAD + 14}" text-anchor="middle" ` +
        `class="tick">${p.gamma}</text>`,
    );
  }
  parts.push('</svg>');
  return parts.join('');
}
