export { MemoryClient } from "./client.js";
export type { MemoryClientOptions } from "./client.js";
export {
  ApiError,
  MemoryClientError,
  ProviderUnavailableError,
  TimeoutError,
  TransportError,
} from "./errors.js";
export type {
  ErrorBody,
  FactEntry,
  HealthResult,
  LpmDump,
  MtmDump,
  Page,
  RecordResult,
  RespondResult,
  RespondStats,
  RetrievalBundle,
  RetrieveResult,
  ScoredFact,
  ScoredPage,
  SegmentDump,
  StmDump,
  TierCounts,
  TierDump,
  TierName,
  TraitValue,
  WipeResult,
} from "./types.js";
