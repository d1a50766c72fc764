// Wire types mirroring the vecsearch HTTP API. The client treats the server
// as the single source of truth: hits are rendered in the order received and
// are never re-scored or re-sorted here.

export type Polarity = 'positive' | 'negative';

export interface DatasetInfo {
  name: string;
  count: number;
  dim: number;
  metric: string;
  has_scenes: boolean;
}

export interface DatasetList {
  datasets: DatasetInfo[];
}

export interface ProjectionResponse {
  dims: number;
  ids: number[];
  classes: (string | null)[];
  coordinates: number[][];
}

export interface Hit {
  id: number;
  score: number;
  class: string | null;
  metadata: Record<string, unknown>;
}

export interface SearchRequest {
  dataset: string;
  mode: 'classic' | 'local' | 'global';
  query: number[];
  k: number;
  /** Decay for local mode; the wire name is the lambda of the objective. */
  lambda?: number;
  batch?: number;
  reg_c?: number;
  epochs?: number;
  coreset_size?: number;
}

export interface SearchResponse {
  hits: Hit[];
  plan_used: string;
  timings: { plan_ms: number; exec_ms: number; total_ms: number };
}

export interface SessionOpenResponse {
  session_id: string;
  dataset: string;
  version: number;
}

export interface LabelIn {
  item_id: number;
  polarity: Polarity;
}

export type Strategy = 'adapt_query' | 'adapt_weights';

export interface FeedbackParams {
  /** Required on the first round of a session; optional afterwards. */
  query?: number[];
  k: number;
  beta?: number;
  gamma?: number;
  eta?: number;
  steps?: number;
}

export interface FeedbackRequest {
  labels: LabelIn[];
  strategy: Strategy;
  params: FeedbackParams;
}

export interface PendingUpdateOut {
  item_id: number;
  new_weights: number[];
  created_round: number;
}

export interface FeedbackResponse {
  round: number;
  hits: Hit[];
  applied_ids: number[];
  new_query?: number[];
  ranking_satisfied?: boolean;
  pending_updates?: PendingUpdateOut[];
  label_errors?: Record<string, string>;
}

export interface RecordedLabel {
  item_id: number;
  polarity: Polarity;
  round: number;
}

export interface RecordedRound {
  query: number[];
  labels: RecordedLabel[];
  strategy: string;
  result_ids: number[];
}

export interface SessionStateResponse {
  session_id: string;
  dataset: string;
  version: number;
  rounds: RecordedRound[];
}
