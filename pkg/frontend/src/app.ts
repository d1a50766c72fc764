import { ApiClient } from './api.js';
import { ScatterPlot } from './scatter.js';
import { UiSession } from './session.js';
import { scoreDelta, summarize } from './summary.js';
import type {
  FeedbackParams,
  FeedbackRequest,
  Hit,
  Polarity,
  Strategy,
} from './types.js';

export interface ReplayResult {
  round: number;
  match: boolean;
  ids: number[];
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Parse "0.1, -2, 3e-2" into floats; null when any piece is not a number. */
export function parseQuery(text: string): number[] | null {
  const parts = text.split(',').map((p) => p.trim()).filter((p) => p.length);
  if (!parts.length) return null;
  const values = parts.map(Number);
  return values.some((v) => !Number.isFinite(v)) ? null : values;
}

/**
 * The feedback-loop client: dataset picker + projection scatter, search
 * panel, labelable result list, refine controls, and a round timeline with
 * replay.
 *
 * Invariants it maintains:
 * - hits are rendered exactly in server order, never re-sorted;
 * - a feedback POST carries exactly the labels currently shown as pressed;
 * - requests are serialized per session, and a response whose round number
 *   is not newer than the last rendered one is discarded;
 * - API failures surface as a toast and leave the session untouched.
 */
export class App {
  session: UiSession | null = null;
  lastHits: Hit[] = [];
  private pendingQuery: number[] | null = null;
  private queryDirty = false;
  private chain: Promise<unknown> = Promise.resolve();

  readonly datasetSelect = el('select', { 'data-role': 'dataset' });
  readonly loadBtn = el('button', { 'data-role': 'load' }, 'Load');
  readonly queryInput = el('input', {
    'data-role': 'query',
    placeholder: 'query: comma-separated floats',
  });
  readonly modeSelect = el('select', { 'data-role': 'mode' });
  readonly kInput = el('input', { 'data-role': 'k', type: 'number', value: '10' });
  readonly lambdaInput = el('input', {
    'data-role': 'lambda', type: 'range', min: '0', max: '1', step: '0.05',
    value: '0.9',
  });
  readonly lambdaValue = el('span', { 'data-role': 'lambda-value' }, '0.90');
  readonly regCInput = el('input', {
    'data-role': 'reg-c', type: 'number', value: '10', step: '0.5',
  });
  readonly epochsInput = el('input', {
    'data-role': 'epochs', type: 'number', value: '200',
  });
  readonly searchBtn = el('button', { 'data-role': 'search' }, 'Search');
  readonly strategySelect = el('select', { 'data-role': 'strategy' });
  readonly betaInput = el('input', {
    'data-role': 'beta', type: 'number', value: '0.75', step: '0.05',
  });
  readonly gammaInput = el('input', {
    'data-role': 'gamma', type: 'number', value: '0.25', step: '0.05',
  });
  readonly etaInput = el('input', {
    'data-role': 'eta', type: 'number', value: '0.05', step: '0.01',
  });
  readonly stepsInput = el('input', {
    'data-role': 'steps', type: 'number', value: '25',
  });
  readonly refineBtn = el('button', { 'data-role': 'refine' }, 'Refine');
  readonly replayBtn = el('button', { 'data-role': 'replay' }, 'Replay rounds');
  readonly results = el('ol', { 'data-role': 'results' });
  readonly timeline = el('ul', { 'data-role': 'timeline' });
  readonly banner = el('div', { 'data-role': 'banner', hidden: '' });
  readonly note = el('div', { 'data-role': 'note', hidden: '' });
  readonly toast = el('div', { 'data-role': 'toast', hidden: '' });
  readonly sessionLabel = el('span', { 'data-role': 'session' }, 'no session');
  readonly planLabel = el('span', { 'data-role': 'plan' }, '');
  readonly scatter = new ScatterPlot();

  constructor(
    readonly root: HTMLElement,
    readonly api: ApiClient,
  ) {
    for (const mode of ['classic', 'local', 'global']) {
      this.modeSelect.appendChild(el('option', { value: mode }, mode));
    }
    for (const s of ['adapt_query', 'adapt_weights']) {
      this.strategySelect.appendChild(el('option', { value: s }, s));
    }
    this.mount();
    this.wire();
  }

  private mount(): void {
    const pickRow = el('div', { class: 'row' });
    pickRow.append('Dataset: ', this.datasetSelect, this.loadBtn,
      this.sessionLabel);

    const searchRow = el('div', { class: 'row' });
    searchRow.append(this.queryInput, ' mode ', this.modeSelect, ' k ',
      this.kInput, ' λ ', this.lambdaInput, this.lambdaValue,
      ' reg_c ', this.regCInput, ' epochs ', this.epochsInput,
      this.searchBtn, this.planLabel);

    const refineRow = el('div', { class: 'row' });
    refineRow.append('Strategy ', this.strategySelect, ' β ',
      this.betaInput, ' γ ', this.gammaInput, ' η ', this.etaInput,
      ' steps ', this.stepsInput, this.refineBtn, this.replayBtn);

    this.banner.className = 'banner';
    this.note.className = 'note';
    this.toast.className = 'toast';

    const main = el('div', { class: 'main' });
    const left = el('div', { class: 'pane' });
    left.append(this.scatter.svg, this.timeline);
    const right = el('div', { class: 'pane' });
    right.append(this.banner, this.note, this.results);
    main.append(left, right);

    this.root.append(pickRow, searchRow, refineRow, this.toast, main);
  }

  private wire(): void {
    this.loadBtn.addEventListener('click', () => {
      void this.enqueue(() => this.loadDataset());
    });
    this.searchBtn.addEventListener('click', () => {
      void this.enqueue(() => this.runSearch());
    });
    this.refineBtn.addEventListener('click', () => {
      void this.enqueue(() => this.runRefine());
    });
    this.replayBtn.addEventListener('click', () => {
      void this.enqueue(() => this.runReplay());
    });
    this.lambdaInput.addEventListener('input', () => {
      this.lambdaValue.textContent =
        Number(this.lambdaInput.value).toFixed(2);
    });
    this.queryInput.addEventListener('input', () => {
      this.queryDirty = true;
    });
  }

  /** Settles once every queued action has finished (tests sync on this). */
  idle(): Promise<unknown> {
    return this.chain;
  }

  /** Serialize user actions so responses can never interleave. */
  private enqueue<T>(job: () => Promise<T>): Promise<T | undefined> {
    const next = this.chain.then(job, job).catch((err: unknown) => {
      this.showToast(err);
      return undefined;
    });
    this.chain = next;
    return next;
  }

  private showToast(err: unknown): void {
    const msg = err instanceof Error ? err.message : String(err);
    this.toast.textContent = `request failed: ${msg}`;
    this.toast.hidden = false;
  }

  private clearTransient(): void {
    this.toast.hidden = true;
    this.note.hidden = true;
  }

  async refreshDatasets(): Promise<void> {
    const list = await this.api.listDatasets();
    this.datasetSelect.replaceChildren(
      ...list.datasets.map((d) =>
        el('option', { value: d.name },
          `${d.name} (${d.count}×${d.dim})`)),
    );
  }

  async loadDataset(): Promise<void> {
    this.clearTransient();
    const name = this.datasetSelect.value;
    if (!name) throw new Error('no dataset selected');
    const projection = await this.api.projection(name);
    this.scatter.render(projection);
    const opened = await this.api.openSession(name);
    this.session = new UiSession(opened.session_id, name);
    this.sessionLabel.textContent =
      `session ${opened.session_id} (v${opened.version})`;
    this.lastHits = [];
    this.pendingQuery = null;
    this.queryDirty = false;
    this.results.replaceChildren();
    this.timeline.replaceChildren();
    this.banner.hidden = true;
  }

  async runSearch(): Promise<void> {
    this.clearTransient();
    if (!this.session) throw new Error('load a dataset first');
    const query = parseQuery(this.queryInput.value);
    if (!query) throw new Error('query must be comma-separated numbers');
    const mode = this.modeSelect.value as 'classic' | 'local' | 'global';
    const res = await this.api.search({
      dataset: this.session.dataset,
      mode,
      query,
      k: Number(this.kInput.value),
      lambda: Number(this.lambdaInput.value),
      reg_c: Number(this.regCInput.value),
      epochs: Number(this.epochsInput.value),
    });
    this.pendingQuery = query;
    this.queryDirty = false;
    this.planLabel.textContent = `plan: ${res.plan_used}`;
    this.renderHits(res.hits);
  }

  async runRefine(): Promise<void> {
    this.clearTransient();
    const session = this.session;
    if (!session) throw new Error('load a dataset first');
    const strategy = this.strategySelect.value as Strategy;
    const labels = session.selectedLabels();
    const params: FeedbackParams = { k: Number(this.kInput.value) };
    if (strategy === 'adapt_query') {
      params.beta = Number(this.betaInput.value);
      params.gamma = Number(this.gammaInput.value);
    } else {
      params.eta = Number(this.etaInput.value);
      params.steps = Number(this.stepsInput.value);
    }
    if (session.lastRound() === 0 || this.queryDirty) {
      const query = this.pendingQuery ?? parseQuery(this.queryInput.value);
      if (!query) throw new Error('search first to establish a query');
      params.query = query;
    }
    const request: FeedbackRequest = { labels, strategy, params };
    const response = await this.api.feedback(session.sessionId, request);
    if (!session.accepts(response.round)) return; // stale: superseded round
    session.record(request, response);
    session.clearLabels();
    this.queryDirty = false;
    if (labels.length === 0) {
      this.note.textContent =
        'No labels selected — no adaptation applied; showing the ' +
        'current ranking unchanged.';
      this.note.hidden = false;
    }
    if (response.ranking_satisfied === false) {
      this.banner.textContent =
        'No single query can rank every labeled positive above every ' +
        'labeled negative; the adapted query is a best effort.';
      this.banner.hidden = false;
    } else {
      this.banner.hidden = true;
    }
    this.renderHits(response.hits);
    this.renderTimeline();
  }

  /** Re-post every recorded round to a fresh session and compare results. */
  async runReplay(): Promise<ReplayResult[]> {
    this.clearTransient();
    const session = this.session;
    if (!session || session.rounds.length === 0) {
      throw new Error('no rounds to replay');
    }
    const fresh = await this.api.openSession(session.dataset);
    const results: ReplayResult[] = [];
    for (const round of session.rounds) {
      const res = await this.api.feedback(fresh.session_id, round.request);
      const ids = res.hits.map((h) => h.id);
      const expected = round.hits.map((h) => h.id);
      results.push({
        round: round.round,
        match:
          ids.length === expected.length &&
          ids.every((id, i) => id === expected[i]),
        ids,
      });
    }
    this.renderTimeline(results);
    return results;
  }

  /** Render hits exactly in server order; rank = position in the payload. */
  renderHits(hits: Hit[]): void {
    this.lastHits = hits;
    const session = this.session;
    this.results.replaceChildren(
      ...hits.map((hit, i) => {
        const li = el('li', {
          'data-id': String(hit.id),
          'data-rank': String(i + 1),
          class: 'hit',
        });
        const chip = el('span', { class: 'chip' }, hit.class ?? '(none)');
        chip.style.background = this.scatter.colorFor(hit.class);
        const meta = Object.entries(hit.metadata)
          .map(([k, v]) => `${k}=${typeof v === 'number' ? v.toFixed(3) : v}`)
          .join(' ');
        li.append(
          el('span', { class: 'rank' }, `#${i + 1}`),
          el('span', { class: 'id' }, `item ${hit.id}`),
          chip,
          el('span', { class: 'score' }, hit.score.toFixed(6)),
          el('span', { class: 'meta' }, meta),
          this.labelButton(hit.id, 'positive', session),
          this.labelButton(hit.id, 'negative', session),
        );
        return li;
      }),
    );
    this.scatter.highlight(hits.map((h) => h.id));
  }

  private labelButton(
    itemId: number,
    polarity: Polarity,
    session: UiSession | null,
  ): HTMLButtonElement {
    const btn = el('button', {
      'data-role': 'label',
      'data-polarity': polarity,
      'data-id': String(itemId),
      class: `label ${polarity}`,
    }, polarity === 'positive' ? '+' : '−');
    btn.setAttribute('aria-pressed',
      String(session?.labelOf(itemId) === polarity));
    btn.addEventListener('click', () => {
      if (!this.session) return;
      this.session.toggleLabel(itemId, polarity);
      this.refreshLabelStates();
    });
    return btn;
  }

  /** Update pressed states in place; never rebuilds or reorders the list. */
  private refreshLabelStates(): void {
    const session = this.session;
    for (const btn of this.results.querySelectorAll('button[data-role="label"]')) {
      const id = Number(btn.getAttribute('data-id'));
      const polarity = btn.getAttribute('data-polarity') as Polarity;
      btn.setAttribute('aria-pressed',
        String(session?.labelOf(id) === polarity));
    }
  }

  private renderTimeline(replay?: ReplayResult[]): void {
    const session = this.session;
    if (!session) return;
    const byRound = new Map((replay ?? []).map((r) => [r.round, r]));
    let prev: Hit[] | null = null;
    this.timeline.replaceChildren(
      ...session.rounds.map((round) => {
        const s = summarize(round.hits);
        const delta = scoreDelta(prev, round.hits);
        prev = round.hits;
        const parts = [
          `R${round.round}`,
          round.request.strategy,
          `labels ${round.request.labels.length}`,
          `purity ${(s.purity * 100).toFixed(0)}% (${s.majorityClass ?? '-'})`,
          `mean ${s.meanScore.toFixed(4)}`,
        ];
        if (delta !== null) {
          parts.push(`Δ ${delta >= 0 ? '+' : ''}${delta.toFixed(4)}`);
        }
        const item = el('li', { 'data-round': String(round.round) },
          parts.join(' · '));
        const rep = byRound.get(round.round);
        if (rep) {
          item.append(' ', el('span', {
            class: rep.match ? 'replay-ok' : 'replay-bad',
            'data-role': 'replay-mark',
          }, rep.match ? '✓ replay' : '✗ replay'));
        }
        return item;
      }),
    );
  }
}

export function buildApp(root: HTMLElement, api: ApiClient): App {
  return new App(root, api);
}
