/**
 * Payload shapes of the review service API. These mirror the server's
 * JSON exactly; nothing here is derived or re-ranked on the client.
 */

export interface RecordJson {
  entry_id: number;
  title: string;
  nature: string;
  qid: string | null;
  status: string;
  confidence: number | null;
  provenance: string;
  reviewer: string | null;
  updated_at: string | null;
  note: string | null;
  qid_url: string | null;
}

export interface CandidateJson {
  qid: string;
  source: string;
  raw_score: number;
  final_score: number;
  penalties: [string, number][];
  evidence: string[];
  label: string;
  qid_url: string;
}

export interface QueueItem {
  entry_id: number;
  title: string;
  nature: string;
  status: string;
  qid: string | null;
  confidence: number | null;
  summary: string;
  source_path: string | null;
  reasons: string[];
  candidates: CandidateJson[];
}

export interface QueuePage {
  items: QueueItem[];
  page: number;
  page_size: number;
  total: number;
  status: string | null;
}

export interface NatureCoverage {
  mapped: number;
  ambiguous: number;
  unmapped: number;
  coverage: number | null;
}

export interface StatsResponse {
  total_entries: number;
  review: Record<string, number>;
  stored: number;
  coverage?: Record<string, NatureCoverage>;
}

export interface TitleForms {
  canonical: string;
  base: string;
  acronym: string | null;
  variants: string[];
}

export interface EntrySummary {
  id: number;
  title: string;
  nature: string;
  summary: string;
  source_path: string | null;
}

export interface DecisionPayload {
  entry_id: number;
  status: string;
  chosen: string | null;
  reasons: string[];
  candidates: CandidateJson[];
}

export interface EntryDetail {
  entry: EntrySummary;
  forms: TitleForms | null;
  record: RecordJson | null;
  decision: DecisionPayload | null;
}

export type Verdict = "confirm" | "reject" | "manual" | "absent";

export interface DecisionRequest {
  verdict: Verdict;
  qid?: string | null;
  reviewer?: string | null;
  note?: string | null;
}

export interface DecisionResult {
  record: RecordJson;
  changed: boolean;
}
