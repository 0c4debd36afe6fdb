/**
 * Wire types for the hiermem HTTP service.
 *
 * These mirror the JSON the server actually sends. Every envelope keeps an
 * index signature so fields added by a newer server survive decoding instead
 * of being silently dropped by the type layer; code that needs them can cast.
 */

/** One recorded exchange (a user query plus the agent's reply). */
export interface Page {
  id: number;
  query: string;
  response: string;
  timestamp: number;
  chain_id: number;
  chain_meta: string;
  keywords: string[];
  [extra: string]: unknown;
}

/** One long-term fact ("user said: ..." / "agent said: ..."). */
export interface FactEntry {
  text: string;
  source_segment: number;
  created_at: number;
  [extra: string]: unknown;
}

/** Last-write-wins trait slot. */
export interface TraitValue {
  value: string;
  confidence: number;
  last_updated: number;
  [extra: string]: unknown;
}

export interface ScoredPage {
  page: Page;
  score: number;
  [extra: string]: unknown;
}

export interface ScoredFact {
  fact: FactEntry;
  score: number;
  [extra: string]: unknown;
}

/** Everything a retrieval pulls together across the three tiers. */
export interface RetrievalBundle {
  stm_pages: Page[];
  mtm_pages: ScoredPage[];
  user_kb_hits: ScoredFact[];
  agent_trait_hits: ScoredFact[];
  user_profile: Record<string, string>;
  user_traits: Record<string, TraitValue>;
  agent_profile: Record<string, string>;
  [extra: string]: unknown;
}

/** Per-tier size counters returned by the mutating endpoints. */
export interface TierCounts {
  stm_pages: number;
  mtm_segments: number;
  mtm_pages: number;
  user_kb: number;
  agent_traits: number;
  user_trait_dims: number;
  [extra: string]: unknown;
}

export interface RespondStats {
  provider_calls: number;
  tokens_in: number;
  tokens_out: number;
  recalled_tokens: number;
  [extra: string]: unknown;
}

export interface RespondResult {
  user_id: string;
  response: string;
  counts: TierCounts;
  stats: RespondStats;
  evicted_segment_ids: number[];
  promoted_segment_ids: number[];
  [extra: string]: unknown;
}

export interface RecordResult {
  user_id: string;
  ingested: boolean;
  counts: TierCounts;
  evicted_segment_ids: number[];
  promoted_segment_ids: number[];
  [extra: string]: unknown;
}

export interface RetrieveResult {
  user_id: string;
  touch: boolean;
  bundle: RetrievalBundle;
  [extra: string]: unknown;
}

export interface StmDump {
  tier: "stm";
  capacity: number;
  pages: Page[];
  [extra: string]: unknown;
}

export interface SegmentDump {
  id: number;
  summary: string;
  keywords: string[];
  n_visit: number;
  l_interaction: number;
  last_access: number;
  heat: number;
  page_count: number;
  pages: Page[];
  [extra: string]: unknown;
}

export interface MtmDump {
  tier: "mtm";
  capacity: number;
  now: number;
  segments: SegmentDump[];
  [extra: string]: unknown;
}

export interface LpmDump {
  tier: "lpm";
  user_profile: Record<string, string>;
  user_kb: FactEntry[];
  user_traits: Record<string, TraitValue>;
  agent_profile: Record<string, string>;
  agent_traits: FactEntry[];
  [extra: string]: unknown;
}

export type TierDump = StmDump | MtmDump | LpmDump;
export type TierName = TierDump["tier"];

export interface WipeResult {
  user_id: string;
  deleted: boolean;
  [extra: string]: unknown;
}

export interface HealthResult {
  status: string;
  [extra: string]: unknown;
}

/** Error body the server sends with any non-2xx status. */
export interface ErrorBody {
  code: string;
  message: string;
  [extra: string]: unknown;
}
