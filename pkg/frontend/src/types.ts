/** Wire formats of the engine service. Field shapes mirror the JSON bodies
 * exactly; the client never does model math, it only renders these. */

export type Axis = 'rows' | 'cols';

export interface AxisEntry {
  kind: 'leaf' | 'group';
  label: string;
  leaves: number[];
}

export interface SessionInfo {
  session_id: string;
  n: number;
  m: number;
  timesteps: string[];
  horizons: number;
  threshold: number;
  snapshot_id: string;
  previewing: boolean;
  hierarchy_versions: Record<Axis, number>;
  active_ordering: Record<Axis, string | null>;
  level_budgets: {
    level1_cells: number;
    documents_page_default: number;
    documents_page_max: number;
  };
  axis: { rows: AxisEntry[]; cols: AxisEntry[] };
}

export interface ViewportBase {
  level: number;
  rows: [number, number];
  cols: [number, number];
  threshold: number;
  n_cells: number;
  mode: 'history' | 'prediction' | 'change';
  t?: number;
  horizon?: number;
  confidence?: number;
  markings?: string[];
}

export interface Level1Payload extends ViewportBase {
  level: 1;
  encoding: 'packbits-base64';
  bits: string;
}

export interface Level2Payload extends ViewportBase {
  level: 2;
  precision: number;
  cells: { row: number[]; col: number[]; value: number[] };
}

export interface TimelineCell {
  row: number;
  col: number;
  history: number[];
  predicted: number[];
  confidence: number[];
}

export interface Level34Payload extends ViewportBase {
  level: 3 | 4;
  cells: TimelineCell[];
}

export interface KeywordCell {
  row: number;
  col: number;
  keywords: [string, number][];
}

export interface Level5Payload extends ViewportBase {
  level: 5;
  cells: KeywordCell[];
}

export interface DocumentRef {
  doc_id: string;
  author: string;
  timestamp: string;
  excerpt: string;
}

export interface DocumentCell {
  row: number;
  col: number;
  documents: DocumentRef[];
  total: number;
}

export interface Level6Payload extends ViewportBase {
  level: 6;
  page: number;
  page_size: number;
  cells: DocumentCell[];
}

export type LevelPayload =
  | Level1Payload
  | Level2Payload
  | Level34Payload
  | Level5Payload
  | Level6Payload;

export interface SearchResult {
  nodes: { id: number; label: string; span: [number, number]; visible: number | null }[];
  edges: { id: number; label: string; span: [number, number]; visible: number | null }[];
  documents: { doc_id: string; position: number; span: [number, number]; cells: number[][] }[];
  total_documents: number;
}

export interface FeedbackJobState {
  job_id: string;
  state: 'running' | 'preview-ready' | 'failed';
  session: string;
  error?: string;
  change?: { before: string; after: string; max_abs_delta: number };
}

export interface ViewChangeResult {
  ok: boolean;
  change: string;
  threshold?: number;
  ordering_id?: string;
  permutation?: number[];
  hierarchy_version?: number;
  axis: { rows: AxisEntry[]; cols: AxisEntry[] };
}

export type HierarchyEdit =
  | { op: 'create_group'; name: string; members: (number | string)[]; parent?: string }
  | { op: 'move_entry'; entry: number | string; parent: string; position?: number }
  | { op: 'rename'; old: string; new: string }
  | { op: 'delete_group'; name: string; cascade?: boolean }
  | { op: 'reorder_siblings'; parent: string; order: (number | string)[] };
