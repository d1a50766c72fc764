import { describe, expect, it } from 'vitest';
import { ScatterPlot } from '../src/scatter.js';
import type { ProjectionResponse } from '../src/types.js';

const projection: ProjectionResponse = {
  dims: 2,
  ids: [0, 1, 2, 3],
  classes: ['a', 'b', 'a', null],
  coordinates: [
    [0, 0],
    [1, 0],
    [0, 1],
    [1, 1],
  ],
};

describe('ScatterPlot', () => {
  it('renders one circle per item, colored consistently by class', () => {
    const plot = new ScatterPlot();
    plot.render(projection);
    const dots = [...plot.svg.querySelectorAll('circle')];
    expect(dots).toHaveLength(4);
    const fillOf = (id: number) =>
      plot.svg.querySelector(`circle[data-id="${id}"]`)!.getAttribute('fill');
    expect(fillOf(0)).toBe(fillOf(2)); // both class "a"
    expect(fillOf(0)).not.toBe(fillOf(1));
    expect(fillOf(3)).toBe(plot.colorFor(null));
  });

  it('highlights hit ids and anchors the query marker at the top hit', () => {
    const plot = new ScatterPlot();
    plot.render(projection);
    plot.highlight([2, 1]);
    const top = plot.svg.querySelector('circle[data-id="2"]')!;
    const idle = plot.svg.querySelector('circle[data-id="0"]')!;
    expect(top.getAttribute('r')).toBe('5');
    expect(top.getAttribute('stroke')).toBe('#222');
    expect(idle.getAttribute('r')).toBe('3');
    expect(idle.getAttribute('stroke')).toBeNull();
    const marker = plot.svg.querySelector('g.query-marker')!;
    expect(marker).not.toBeNull();
    const line = marker.querySelector('line')!;
    // crosshair centered on the highlighted top hit
    const cx = Number(top.getAttribute('cx'));
    expect(Number(line.getAttribute('x1'))).toBeCloseTo(cx - 9, 6);
    expect(Number(line.getAttribute('x2'))).toBeCloseTo(cx + 9, 6);
  });

  it('clears the previous highlight and marker on re-highlight', () => {
    const plot = new ScatterPlot();
    plot.render(projection);
    plot.highlight([2]);
    plot.highlight([3]);
    expect(
      plot.svg.querySelector('circle[data-id="2"]')!.getAttribute('r'),
    ).toBe('3');
    expect(plot.svg.querySelectorAll('g.query-marker')).toHaveLength(1);
    plot.highlight([]);
    expect(plot.svg.querySelectorAll('g.query-marker')).toHaveLength(0);
  });
});
