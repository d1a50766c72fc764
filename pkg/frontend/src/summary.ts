import type { Hit } from './types.js';

/** Display summary of one hit list: class purity and mean score. */
export interface RoundSummary {
  purity: number;
  majorityClass: string | null;
  meanScore: number;
}

/**
 * Purity = share of the most common class label among the hits.
 *
 * Pure display arithmetic over server-provided labels; unlabeled items
 * count as their own bucket. Empty lists summarize to zeros.
 */
export function summarize(hits: Hit[]): RoundSummary {
  if (hits.length === 0) {
    return { purity: 0, majorityClass: null, meanScore: 0 };
  }
  const counts = new Map<string | null, number>();
  for (const h of hits) {
    counts.set(h.class, (counts.get(h.class) ?? 0) + 1);
  }
  let majorityClass: string | null = null;
  let best = -1;
  for (const [cls, n] of counts) {
    if (n > best) {
      best = n;
      majorityClass = cls;
    }
  }
  const meanScore =
    hits.reduce((acc, h) => acc + h.score, 0) / hits.length;
  return { purity: best / hits.length, majorityClass, meanScore };
}

/** Mean-score delta of `curr` relative to `prev`; null without a baseline. */
export function scoreDelta(prev: Hit[] | null, curr: Hit[]): number | null {
  if (!prev || prev.length === 0 || curr.length === 0) return null;
  return summarize(curr).meanScore - summarize(prev).meanScore;
}
