/** Payload shapes of the session REST API. */

export interface SchemaInfo {
  components: string[];
  separator: string;
}

export interface PoolSizes {
  unlabeled: number;
  human: number;
  weak: number;
  verified: number;
}

export interface F1Info {
  entity_f1: number;
  token_f1: number;
}

export interface StatusPayload {
  session_id: string;
  status: "awaiting_label" | "awaiting_verification" | "training" | "stopped";
  schema: SchemaInfo;
  pools: PoolSizes;
  flagged: number;
  budget_used: number;
  budget_max: number;
  iteration: number;
  low_conf_correct_rate: number | null;
  stopped: boolean;
  stop_reason: string | null;
  f1: F1Info | null;
}

export interface NextPayload {
  mention_id: string;
  raw: string;
  tokens: string[];
  /** Token index runs that share a collapsed structure group. */
  groups: number[][];
  informative_score: number;
  representativeness: number;
  pools: PoolSizes;
  budget_used: number;
  budget_max: number;
}

export interface VerificationItem {
  mention_id: string;
  labels: string[];
  confidence: number;
  bucket: "high" | "low";
}

export interface VerifyPayload {
  high: VerificationItem[];
  low: VerificationItem[];
}

export interface LabelSummary {
  mention_id: string;
  weak_labeled_count: number;
  weak_labeled_ids: string[];
  loss_trace: number[];
  verification: VerificationItem[];
  status: string;
}

export interface FeedbackResult {
  stopped: boolean;
  stop_reason: string | null;
  low_conf_correct_rate: number | null;
  pools: PoolSizes;
  status: string;
}

export interface SessionParams {
  corpus?: string;
  k?: number;
  p?: number;
  q?: number;
  budget?: number;
  seed?: number;
  test_fraction?: number;
}

export type Verdict = "correct" | "incorrect";
