/**
 * Review queue state machine. Keyboard handlers and buttons call into
 * this; it owns the pending items and the decision lifecycle.
 *
 * Rules it enforces:
 * - one user action issues exactly one decision POST (a busy flag
 *   swallows repeats while a request is in flight);
 * - the cursor advances only after the server confirms the write, so
 *   there is no optimistic state to roll back;
 * - a 409 keeps the item on screen and surfaces the other reviewer's
 *   record; nothing is overwritten and navigation is blocked until the
 *   conflict is acknowledged;
 * - any other failure keeps the item in the queue with an error note.
 */

import { ConflictError, QueueQuery } from "./api.js";
import type {
  DecisionRequest,
  DecisionResult,
  QueueItem,
  QueuePage,
  RecordJson,
  StatsResponse,
  Verdict,
} from "./types.js";

/** The slice of ApiClient the session needs; tests substitute fakes. */
export interface ReviewApi {
  queue(query?: QueueQuery): Promise<QueuePage>;
  stats(): Promise<StatsResponse>;
  decide(id: number, body: DecisionRequest): Promise<DecisionResult>;
}

export interface DecideOptions {
  qid?: string | null;
  note?: string | null;
}

export class ReviewSession {
  items: QueueItem[] = [];
  index = 0;
  selected = 0;
  busy = false;
  conflict: RecordJson | null = null;
  error: string | null = null;
  lastResult: DecisionResult | null = null;
  decidedThisSession = 0;
  stats: StatsResponse | null = null;
  reviewer: string | null = null;

  private listeners: Array<() => void> = [];

  constructor(
    private readonly api: ReviewApi,
    readonly queueStatus: string = "unreviewed_auto",
    private readonly pageSize: number = 200,
  ) {}

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  get current(): QueueItem | null {
    return this.items[this.index] ?? null;
  }

  get remaining(): number {
    return this.items.length;
  }

  /** Pull the whole queue (all pages, server order) and fresh stats. */
  async load(): Promise<void> {
    const collected: QueueItem[] = [];
    let page = 1;
    for (;;) {
      const batch = await this.api.queue({
        status: this.queueStatus,
        page,
        pageSize: this.pageSize,
      });
      collected.push(...batch.items);
      if (collected.length >= batch.total || batch.items.length === 0) break;
      page += 1;
    }
    this.items = collected;
    this.index = 0;
    this.selected = 0;
    this.conflict = null;
    this.error = null;
    this.stats = await this.api.stats();
    this.notify();
  }

  async refreshStats(): Promise<void> {
    this.stats = await this.api.stats();
    this.notify();
  }

  selectCandidate(i: number): void {
    const item = this.current;
    if (!item || this.conflict) return;
    if (i >= 0 && i < item.candidates.length) {
      this.selected = i;
      this.notify();
    }
  }

  /** Move the cursor without deciding; the item stays in the queue. */
  next(): void {
    if (this.conflict || this.items.length === 0) return;
    this.index = (this.index + 1) % this.items.length;
    this.selected = 0;
    this.error = null;
    this.notify();
  }

  previous(): void {
    if (this.conflict || this.items.length === 0) return;
    this.index = (this.index - 1 + this.items.length) % this.items.length;
    this.selected = 0;
    this.error = null;
    this.notify();
  }

  /**
   * POST one verdict for the current item. Returns the server record on
   * success, null when the action was swallowed or failed.
   */
  async decide(verdict: Verdict, options: DecideOptions = {}): Promise<RecordJson | null> {
    const item = this.current;
    if (!item || this.busy || this.conflict) return null;

    let qid = options.qid;
    if (qid === undefined && verdict === "confirm") {
      qid = item.candidates[this.selected]?.qid ?? item.qid;
    }

    this.busy = true;
    this.error = null;
    this.notify();
    try {
      const result = await this.api.decide(item.entry_id, {
        verdict,
        qid: qid ?? null,
        reviewer: this.reviewer,
        note: options.note ?? null,
      });
      this.lastResult = result;
      this.decidedThisSession += 1;
      this.removeCurrent();
      return result.record;
    } catch (err) {
      if (err instanceof ConflictError) {
        this.conflict = err.record;
      } else {
        this.error = err instanceof Error ? err.message : String(err);
      }
      return null;
    } finally {
      this.busy = false;
      this.notify();
    }
  }

  /**
   * Accept that someone else decided this entry: drop it from the local
   * queue (the server already did) and move on.
   */
  acknowledgeConflict(): void {
    if (!this.conflict) return;
    this.conflict = null;
    this.removeCurrent();
    this.notify();
  }

  private removeCurrent(): void {
    if (this.items.length === 0) return;
    this.items.splice(this.index, 1);
    if (this.index >= this.items.length) this.index = 0;
    this.selected = 0;
  }
}
