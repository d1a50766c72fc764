import type {
  FeedbackRequest,
  FeedbackResponse,
  Hit,
  LabelIn,
  Polarity,
} from './types.js';

/** One displayed feedback round: the request that produced it, the server's
 * response, and the hit list exactly as received. */
export interface UiRound {
  round: number;
  request: FeedbackRequest;
  response: FeedbackResponse;
  hits: Hit[];
}

/**
 * Client-side mirror of one server session.
 *
 * Rounds are append-only and numbered by the server; a response whose round
 * number is not greater than the last recorded one is stale (superseded by
 * a newer request) and is dropped by the caller via `accepts`.
 *
 * Label selection lives here too: the set of (item id -> polarity) choices
 * currently shown as pressed in the UI. `selectedLabels` returns exactly
 * that set, so a feedback POST built from it carries precisely what the
 * user sees.
 */
export class UiSession {
  readonly rounds: UiRound[] = [];
  private readonly labels = new Map<number, Polarity>();

  constructor(
    readonly sessionId: string,
    readonly dataset: string,
  ) {}

  /** Latest recorded round number; 0 before any feedback round. */
  lastRound(): number {
    const last = this.rounds[this.rounds.length - 1];
    return last ? last.round : 0;
  }

  /** Whether a response with this round number may be rendered. */
  accepts(round: number): boolean {
    return round > this.lastRound();
  }

  /** Append a round; rejects stale or out-of-order rounds. */
  record(request: FeedbackRequest, response: FeedbackResponse): UiRound {
    if (!this.accepts(response.round)) {
      throw new Error(
        `stale round ${response.round} (already at ${this.lastRound()})`,
      );
    }
    const entry: UiRound = {
      round: response.round,
      request,
      response,
      hits: response.hits,
    };
    this.rounds.push(entry);
    return entry;
  }

  /** Cycle an item's label: none -> polarity, same -> none, other -> flip. */
  toggleLabel(itemId: number, polarity: Polarity): void {
    if (this.labels.get(itemId) === polarity) {
      this.labels.delete(itemId);
    } else {
      this.labels.set(itemId, polarity);
    }
  }

  labelOf(itemId: number): Polarity | undefined {
    return this.labels.get(itemId);
  }

  /** The labels currently selected, ascending by item id. */
  selectedLabels(): LabelIn[] {
    return [...this.labels.entries()]
      .sort((a, b) => a[0] - b[0])
      .map(([item_id, polarity]) => ({ item_id, polarity }));
  }

  clearLabels(): void {
    this.labels.clear();
  }

  /** The request payloads of every recorded round, for replay. */
  recordedRequests(): FeedbackRequest[] {
    return this.rounds.map((r) => r.request);
  }
}
