import { ApiClient, ApiError } from './api';
import type { EstimatesResponse, QueryPayload } from './types';

export interface LabelerCallbacks {
  /** A new answerable query (or null when the session is complete). */
  onQuery(query: QueryPayload | null): void;
  /** Fresh estimates straight from the API. */
  onEstimates(estimates: EstimatesResponse): void;
  /** Recoverable problem; the current state is unchanged. */
  onError(message: string, retryable: boolean): void;
}

/** Drives one labeling session: fetches queries, submits answers, and
 * advances only after the server acknowledges. No optimistic updates, and a
 * query id is never submitted twice from this client. */
export class Labeler {
  private current: QueryPayload | null = null;
  private submitted = new Set<string>();
  private busy = false;

  constructor(
    private readonly api: ApiClient,
    readonly sessionId: string,
    private readonly callbacks: LabelerCallbacks,
  ) {}

  get currentQuery(): QueryPayload | null {
    return this.current;
  }

  /** Fetch the current query and estimates (also used on page load). */
  async refresh(): Promise<void> {
    const [query, estimates] = await Promise.all([
      this.api.nextQuery(this.sessionId),
      this.api.estimates(this.sessionId),
    ]);
    this.current = query;
    this.callbacks.onEstimates(estimates);
    this.callbacks.onQuery(query);
  }

  /** Submit a label for the current query, then advance. Returns true when
   * the answer was recorded (or the query turned out to be already answered
   * elsewhere and the view was refreshed). */
  async answer(label: 0 | 1): Promise<boolean> {
    if (this.busy || this.current === null) return false;
    const query = this.current;
    if (this.submitted.has(query.id)) {
      // Client-side duplicate guard; resync instead of re-posting.
      await this.refresh();
      return false;
    }
    this.busy = true;
    try {
      await this.api.submitAnswer(this.sessionId, query.id, label);
      this.submitted.add(query.id);
      await this.refresh();
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Another tab answered first; adopt the server's state.
        this.submitted.add(query.id);
        await this.refresh();
        return false;
      }
      const message = err instanceof Error ? err.message : String(err);
      const retryable = !(err instanceof ApiError);
      this.callbacks.onError(message, retryable);
      return false;
    } finally {
      this.busy = false;
    }
  }

  /** Skip a query the browser could not render; nothing is sent. */
  async skip(): Promise<void> {
    await this.refresh();
  }
}
