import type { ProjectionResponse } from './types.js';

const SVG_NS = 'http://www.w3.org/2000/svg';
const PALETTE = [
  '#4c78a8', '#f58518', '#54a24b', '#e45756', '#72b7b2',
  '#b279a2', '#ff9da6', '#9d755d', '#bab0ac', '#eeca3b',
];

/** Class-colored 2-D scatter of the server-side projection.
 *
 * Coordinates come from the API verbatim; this component only maps them
 * linearly into the viewport, recolors by class, raises the items in the
 * current hit set, and overlays a query marker anchored at the top hit.
 */
export class ScatterPlot {
  readonly svg: SVGSVGElement;
  private readonly classColor = new Map<string, string>();
  private points = new Map<number, SVGCircleElement>();
  private marker: SVGGElement | null = null;

  constructor(
    private readonly width = 420,
    private readonly height = 320,
  ) {
    this.svg = document.createElementNS(SVG_NS, 'svg');
    this.svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
    this.svg.setAttribute('class', 'scatter');
    this.svg.setAttribute('role', 'img');
  }

  colorFor(cls: string | null): string {
    const key = cls ?? '(none)';
    let color = this.classColor.get(key);
    if (!color) {
      color = PALETTE[this.classColor.size % PALETTE.length]!;
      this.classColor.set(key, color);
    }
    return color;
  }

  /** Rebuild all points from a projection payload. */
  render(projection: ProjectionResponse): void {
    this.svg.replaceChildren();
    this.points = new Map();
    this.marker = null;
    const xs = projection.coordinates.map((c) => c[0] ?? 0);
    const ys = projection.coordinates.map((c) => c[1] ?? 0);
    const pad = 12;
    const xMin = Math.min(...xs);
    const xMax = Math.max(...xs);
    const yMin = Math.min(...ys);
    const yMax = Math.max(...ys);
    const sx = (v: number) =>
      pad + ((v - xMin) / (xMax - xMin || 1)) * (this.width - 2 * pad);
    const sy = (v: number) =>
      pad + ((v - yMin) / (yMax - yMin || 1)) * (this.height - 2 * pad);

    projection.ids.forEach((id, i) => {
      const dot = document.createElementNS(SVG_NS, 'circle');
      dot.setAttribute('cx', String(sx(xs[i]!)));
      dot.setAttribute('cy', String(sy(ys[i]!)));
      dot.setAttribute('r', '3');
      dot.setAttribute('fill', this.colorFor(projection.classes[i] ?? null));
      dot.setAttribute('fill-opacity', '0.45');
      dot.setAttribute('data-id', String(id));
      this.svg.appendChild(dot);
      this.points.set(id, dot);
    });
  }

  /** Raise the given ids; the first id anchors the query marker. */
  highlight(hitIds: number[]): void {
    for (const dot of this.points.values()) {
      dot.setAttribute('r', '3');
      dot.setAttribute('fill-opacity', '0.45');
      dot.removeAttribute('stroke');
    }
    for (const id of hitIds) {
      const dot = this.points.get(id);
      if (!dot) continue;
      dot.setAttribute('r', '5');
      dot.setAttribute('fill-opacity', '1');
      dot.setAttribute('stroke', '#222');
      dot.setAttribute('stroke-width', '1');
    }
    this.placeMarker(hitIds.length ? hitIds[0]! : null);
  }

  /** Crosshair at the top hit: where the query lands in the display. */
  private placeMarker(anchorId: number | null): void {
    this.marker?.remove();
    this.marker = null;
    if (anchorId === null) return;
    const dot = this.points.get(anchorId);
    if (!dot) return;
    const cx = Number(dot.getAttribute('cx'));
    const cy = Number(dot.getAttribute('cy'));
    const g = document.createElementNS(SVG_NS, 'g');
    g.setAttribute('class', 'query-marker');
    for (const [x1, y1, x2, y2] of [
      [cx - 9, cy, cx + 9, cy],
      [cx, cy - 9, cx, cy + 9],
    ]) {
      const line = document.createElementNS(SVG_NS, 'line');
      line.setAttribute('x1', String(x1));
      line.setAttribute('y1', String(y1));
      line.setAttribute('x2', String(x2));
      line.setAttribute('y2', String(y2));
      line.setAttribute('stroke', '#d62728');
      line.setAttribute('stroke-width', '1.5');
      g.appendChild(line);
    }
    this.svg.appendChild(g);
    this.marker = g;
  }
}
