/** Schemas mirroring the curation service API. */

export interface HighlightSpan {
  start: number;
  end: number;
  kind: "participant" | "trigger";
}

export interface CurationItem {
  item_id: string;
  a: string;
  ptm: string;
  b: string;
  pmid: string;
  text: string;
  spans: HighlightSpan[];
  confidence: number;
  std: number;
  status: "pending" | "reviewed";
}

export type Decision = "correct" | "incorrect" | "unsure";

export interface VerdictBody {
  decision: Decision;
  category?: string;
  reviewer: string;
}

export interface Meta {
  decisions: Decision[];
  categories: string[];
  ptms: string[];
}

export interface PtmReport {
  correct: number;
  incorrect: number;
  unsure: number;
  categories: Record<string, number>;
  precision_strict: number | null;
  precision_incl: number | null;
}

export interface Report {
  per_ptm: Record<string, PtmReport>;
  correct: number;
  incorrect: number;
  unsure: number;
  categories: Record<string, number>;
  precision_strict: number | null;
  precision_incl: number | null;
}
