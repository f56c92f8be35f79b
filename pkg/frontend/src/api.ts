import type {
  Axis,
  FeedbackJobState,
  HierarchyEdit,
  LevelPayload,
  SearchResult,
  SessionInfo,
  ViewChangeResult,
} from './types.js';

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      if (body && typeof body.detail === 'string') detail = body.detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export interface ViewportQuery {
  level: number;
  row0: number;
  row1: number;
  col0: number;
  col1: number;
  t?: number;
  mode?: 'predictions' | 'change';
  page?: number;
  pageSize?: number;
}

/** Thin typed client over the service endpoints; all state lives server-side. */
export class EngineClient {
  private sessionId = '';

  constructor(
    private readonly base: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  get session(): string {
    return this.sessionId;
  }

  async openSession(): Promise<SessionInfo> {
    const info = await asJson<SessionInfo>(await this.fetchFn(`${this.base}/session`));
    this.sessionId = info.session_id;
    return info;
  }

  async sessionInfo(): Promise<SessionInfo> {
    return asJson(
      await this.fetchFn(`${this.base}/session?session=${encodeURIComponent(this.sessionId)}`),
    );
  }

  async viewport(q: ViewportQuery): Promise<LevelPayload> {
    const params = new URLSearchParams({
      session: this.sessionId,
      level: String(q.level),
      row0: String(q.row0),
      row1: String(q.row1),
      col0: String(q.col0),
      col1: String(q.col1),
    });
    if (q.t !== undefined) params.set('t', String(q.t));
    if (q.mode) params.set('mode', q.mode);
    if (q.page !== undefined) params.set('page', String(q.page));
    if (q.pageSize !== undefined) params.set('page_size', String(q.pageSize));
    return asJson(await this.fetchFn(`${this.base}/viewport?${params}`));
  }

  async search(query: string, limit = 20, offset = 0): Promise<SearchResult> {
    const params = new URLSearchParams({
      session: this.sessionId,
      q: query,
      limit: String(limit),
      offset: String(offset),
    });
    return asJson(await this.fetchFn(`${this.base}/search?${params}`));
  }

  private async postView(body: Record<string, unknown>): Promise<ViewChangeResult> {
    return asJson(
      await this.fetchFn(`${this.base}/view`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ session: this.sessionId, ...body }),
      }),
    );
  }

  setThreshold(threshold: number): Promise<ViewChangeResult> {
    return this.postView({ threshold });
  }

  requestOrdering(
    axis: Axis,
    strategy: 'dendrogram' | 'size' | 'first_occurrence',
    metric?: 'euclidean' | 'cosine' | 'jaccard',
    linkage?: 'single' | 'complete' | 'average' | 'ward',
    respectFilter = false,
  ): Promise<ViewChangeResult> {
    return this.postView({
      ordering: { axis, strategy, metric, linkage, respect_filter: respectFilter },
    });
  }

  editHierarchy(axis: Axis, edit: HierarchyEdit): Promise<ViewChangeResult> {
    return this.postView({ hierarchy_edit: { axis, edit } });
  }

  setCollapse(axis: Axis, group: string, collapsed: boolean): Promise<ViewChangeResult> {
    return this.postView({ collapse: { axis, group, collapsed } });
  }

  annotate(target: Record<string, unknown>, text: string): Promise<ViewChangeResult> {
    return this.postView({ annotation: { target, text } });
  }

  setMarking(row: number, col: number, starred: boolean): Promise<ViewChangeResult> {
    return this.postView({ marking: { row, col, starred } });
  }

  async submitFeedback(
    assertions: [number, number, number, number][],
  ): Promise<{ job_id: string; state: string }> {
    return asJson(
      await this.fetchFn(`${this.base}/feedback`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ session: this.sessionId, assertions }),
      }),
    );
  }

  async pollJob(jobId: string, waitMs = 500): Promise<FeedbackJobState> {
    return asJson(
      await this.fetchFn(`${this.base}/feedback/job/${jobId}?wait_ms=${waitMs}`),
    );
  }

  async resolveFeedback(decision: 'accept' | 'reject'): Promise<{ snapshot_id: string }> {
    return asJson(
      await this.fetchFn(`${this.base}/feedback/resolve`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ session: this.sessionId, decision }),
      }),
    );
  }

  async cellTimeline(row: number, col: number): Promise<unknown> {
    return asJson(
      await this.fetchFn(
        `${this.base}/cell/${row}/${col}/timeline?session=${this.sessionId}`,
      ),
    );
  }

  async undo(): Promise<{ head: number; snapshot_id: string }> {
    return asJson(
      await this.fetchFn(`${this.base}/provenance/undo`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ session: this.sessionId }),
      }),
    );
  }
}
