import { describe, expect, it } from 'vitest';
import { chartPoints, renderChart } from '../src/charts';
import type { EstimateRecord } from '../src/types';

function record(overrides: Partial<EstimateRecord>): EstimateRecord {
  return {
    gamma: 0.4,
    n_detections: 30,
    k: 8,
    fp_hat: 2,
    p_hat: 0.75,
    t_pools: 10,
    positives: 2,
    beta_hat: 0.01,
    fn_hat: 3,
    recall_hat: 0.88,
    flags: [],
    ...overrides,
  };
}

describe('chartPoints', () => {
  it('passes API values through verbatim', () => {
    const points = chartPoints([record({ p_hat: 0.8125 })], 'p_hat');
    expect(points).toHaveLength(1);
    expect(points[0].value).toBe(0.8125);
  });

  it('drops null values and sorts by gamma', () => {
    const recs = [
      record({ gamma: 0.6, p_hat: 0.5 }),
      record({ gamma: 0.2, p_hat: null }),
      record({ gamma: 0.4, p_hat: 0.9 }),
    ];
    const points = chartPoints(recs, 'p_hat');
    expect(points.map((p) => p.gamma)).toEqual([0.4, 0.6]);
  });

  it('marks low-confidence and pending flags', () => {
    const points = chartPoints(
      [record({ flags: ['low-confidence'] }), record({ gamma: 0.5, flags: ['recall-pending'] })],
      'recall_hat',
    );
    expect(points[0].lowConfidence).toBe(true);
    expect(points[0].pending).toBe(false);
    expect(points[1].pending).toBe(true);
  });
});

describe('renderChart', () => {
  it('renders one marker per gamma with the exact value attached', () => {
    const recs = [record({ gamma: 0.3, p_hat: 0.625 }), record({ gamma: 0.5, p_hat: 1.0 })];
    const svg = renderChart(recs, 'p_hat', 'Precision');
    expect(svg.match(/<circle/g)).toHaveLength(2);
    expect(svg).toContain('data-value="0.625"');
    expect(svg).toContain('data-value="1"');
    expect(svg).toContain('<polyline');
  });

  it('renders a single point without a line', () => {
    const svg = renderChart([record({})], 'recall_hat', 'Recall');
    expect(svg.match(/<circle/g)).toHaveLength(1);
    expect(svg).not.toContain('<polyline');
  });

  it('adds a warning glyph to low-confidence estimates', () => {
    const svg = renderChart(
      [record({ flags: ['low-confidence'] })],
      'recall_hat',
      'Recall',
    );
    expect(svg).toContain('⚠');
    expect(svg).toContain('class="warning"');
  });

  it('omits markers when the value is still null', () => {
    const svg = renderChart([record({ recall_hat: null })], 'recall_hat', 'Recall');
    expect(svg).not.toContain('<circle');
  });
});
