import type {
  EstimateRecord,
  EstimatesResponse,
  QueryPayload,
  SessionCreated,
  SessionSummary,
} from './types';

export class ApiError extends Error {
  constructor(message: string, public readonly status: number) {
    super(message);
    this.name = 'ApiError';
  }
}

async function parseError(res: Response): Promise<ApiError> {
  let message = `request failed with status ${res.status}`;
  try {
    const body = await res.json();
    if (body && typeof body.error === 'string') message = body.error;
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ApiError(message, res.status);
}

/** Thin typed client over the session service. */
export class ApiClient {
  constructor(private readonly base: string = '') {}

  private url(path: string): string {
    return this.base.replace(/\/$/, '') + path;
  }

  async createSession(body: {
    manifest: string;
    detections: string;
    groundtruth?: string;
    out_dir?: string;
    config?: Record<string, unknown>;
  }): Promise<SessionCreated> {
    const res = await fetch(this.url('/sessions'), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw await parseError(res);
    return res.json();
  }

  async listSessions(): Promise<SessionSummary[]> {
    const res = await fetch(this.url('/sessions'));
    if (!res.ok) throw await parseError(res);
    const body = await res.json();
    return body.sessions;
  }

  /** Next unanswered query; null when the session (or gamma) is complete. */
  async nextQuery(sessionId: string, gamma?: number): Promise<QueryPayload | null> {
    const suffix = gamma === undefined ? '' : `?gamma=${gamma}`;
    const res = await fetch(this.url(`/sessions/${sessionId}/next${suffix}`));
    if (res.status === 204) return null;
    if (!res.ok) throw await parseError(res);
    return res.json();
  }

  async submitAnswer(
    sessionId: string,
    queryId: string,
    label: 0 | 1,
  ): Promise<EstimateRecord> {
    const res = await fetch(this.url(`/sessions/${sessionId}/answers`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ query_id: queryId, label }),
    });
    if (!res.ok) throw await parseError(res);
    return res.json();
  }

  async estimates(sessionId: string): Promise<EstimatesResponse> {
    const res = await fetch(this.url(`/sessions/${sessionId}/estimates`));
    if (!res.ok) throw await parseError(res);
    return res.json();
  }
}
