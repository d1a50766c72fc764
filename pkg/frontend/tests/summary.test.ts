import { describe, expect, it } from 'vitest';
import { scoreDelta, summarize } from '../src/summary.js';
import type { Hit } from '../src/types.js';

function hit(id: number, score: number, cls: string | null): Hit {
  return { id, score, class: cls, metadata: {} };
}

describe('summarize', () => {
  it('reports majority-class share and mean score', () => {
    const hits = [
      hit(0, 1.0, 'a'),
      hit(1, 2.0, 'a'),
      hit(2, 3.0, 'b'),
      hit(3, 6.0, 'a'),
    ];
    const s = summarize(hits);
    expect(s.purity).toBeCloseTo(0.75, 12);
    expect(s.majorityClass).toBe('a');
    expect(s.meanScore).toBeCloseTo(3.0, 12);
  });

  it('buckets unlabeled items under their own class', () => {
    const s = summarize([hit(0, 1, null), hit(1, 1, null), hit(2, 1, 'a')]);
    expect(s.purity).toBeCloseTo(2 / 3, 12);
    expect(s.majorityClass).toBeNull();
  });

  it('summarizes an empty list to zeros', () => {
    expect(summarize([])).toEqual({
      purity: 0,
      majorityClass: null,
      meanScore: 0,
    });
  });
});

describe('scoreDelta', () => {
  it('is null without a baseline and a difference with one', () => {
    const prev = [hit(0, 1.0, 'a'), hit(1, 3.0, 'a')];
    const curr = [hit(2, 2.0, 'a'), hit(3, 2.0, 'a')];
    expect(scoreDelta(null, curr)).toBeNull();
    expect(scoreDelta([], curr)).toBeNull();
    expect(scoreDelta(prev, curr)).toBeCloseTo(0.0, 12);
    expect(scoreDelta(prev, [hit(4, 5.0, 'a')])).toBeCloseTo(3.0, 12);
  });
});
