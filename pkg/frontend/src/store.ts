/**
 * Segment grid state machine: click-to-fetch MT, edit, confirm-to-retrain.
 *
 * Guards built in:
 *  - a row fetches MT at most once and never while a request is in flight;
 *  - at most one update request is in flight per project, extras queue FIFO;
 *  - each confirm carries an idempotency key (segment id + revision), so a
 *    retry of the same revision cannot double-count on the reviewer's side
 *    and exactly one accepted update exists per confirmed row.
 */

import { ApiClient, ApiError } from './api.js';
import { EffortLogger } from './logger.js';
import type { SegmentRow, WorkbenchSettings } from './types.js';
import { canTransition } from './types.js';

export interface ConfirmResult {
  row: SegmentRow;
  updatesApplied: number;
}

export class SegmentStore {
  readonly rows: SegmentRow[] = [];
  readonly logger: EffortLogger;
  private readonly api: ApiClient;
  private readonly fetching = new Set<string>();
  private readonly confirming = new Set<string>();
  private readonly acceptedKeys = new Set<string>();
  private updateQueue: Promise<void> = Promise.resolve();
  lastError: string | null = null;

  constructor(
    readonly settings: WorkbenchSettings,
    logger?: EffortLogger,
    api?: ApiClient,
  ) {
    this.logger = logger ?? new EffortLogger();
    this.api = api ?? new ApiClient(settings);
  }

  /** Load a document: tab-separated `id<TAB>source` or one source per line. */
  loadDocument(text: string): void {
    this.rows.length = 0;
    const lines = text.split('\n').filter((line) => line.trim() !== '');
    lines.forEach((line, index) => {
      const [maybeId, rest] = splitOnce(line, '\t');
      const hasId = rest !== null;
      this.rows.push({
        id: hasId ? maybeId : `s${index + 1}`,
        source: hasId ? rest! : line,
        target: '',
        status: 'untranslated',
        hypothesisId: null,
        revision: 0,
        acknowledgedCounter: null,
        error: null,
      });
    });
  }

  row(id: string): SegmentRow {
    const row = this.rows.find((r) => r.id === id);
    if (!row) throw new Error(`no such segment: ${id}`);
    return row;
  }

  /** Target-cell click: fetch MT for an untranslated row. */
  async fetchTranslation(id: string): Promise<SegmentRow> {
    const row = this.row(id);
    this.logger.recordMouse(id, 'click');
    if (!this.settings.useMachineTranslation) return row;
    if (row.status !== 'untranslated' || this.fetching.has(id)) return row;
    this.fetching.add(id);
    try {
      const response = await this.api.translate(row.id, row.source);
      const segment = response.segments[0];
      if (!segment) throw new ApiError(500, 'bad_response', 'empty segments in response');
      row.target = segment.tgt;
      row.hypothesisId = segment.hypothesis_id;
      this.transition(row, 'machine-translated');
      row.error = null;
      this.logger.recordFocus(id);
      return row;
    } catch (error) {
      this.lastError = describe(error);
      row.error = this.lastError;
      return row; // row unchanged except the error note
    } finally {
      this.fetching.delete(id);
    }
  }

  /** One logical edit: keeps row state and the effort log in sync. */
  edit(id: string, newTarget: string, key: string, kind: 'insert' | 'delete' | 'paste' = 'insert'): void {
    const row = this.row(id);
    if (row.status === 'confirmed' || row.status === 'untranslated') {
      throw new Error(`cannot edit segment ${id} in status ${row.status}`);
    }
    if (kind === 'insert') this.logger.recordInsert(id, key);
    else if (kind === 'delete') this.logger.recordDelete(id);
    else this.logger.recordPaste(id, newTarget.length - row.target.length);
    row.target = newTarget;
    if (row.status !== 'editing') this.transition(row, 'editing');
  }

  /** Confirm: send (source, edited target) for retraining; FIFO per project. */
  confirmSegment(id: string): Promise<ConfirmResult> {
    const row = this.row(id);
    if (row.status !== 'editing' && row.status !== 'machine-translated') {
      return Promise.reject(new Error(`cannot confirm segment ${id} in status ${row.status}`));
    }
    if (this.confirming.has(id)) {
      return Promise.reject(new Error(`confirm already in flight for segment ${id}`));
    }
    this.confirming.add(id);
    const key = `${row.id}#r${row.revision}`;
    const result = this.updateQueue.then(async (): Promise<ConfirmResult> => {
      if (this.acceptedKeys.has(key)) {
        // a retry of an already-accepted revision must not double-send
        return { row, updatesApplied: row.acknowledgedCounter ?? 0 };
      }
      try {
        const ack = await this.api.update(key, row.source, row.target);
        this.acceptedKeys.add(key);
        row.acknowledgedCounter = ack.updates_applied;
        this.transition(row, 'confirmed');
        row.error = null;
        this.logger.recordConfirm(id);
        return { row, updatesApplied: ack.updates_applied };
      } catch (error) {
        // stay editable and offer a retry with a fresh revision
        if (row.status === 'machine-translated') this.transition(row, 'editing');
        row.revision += 1;
        row.error = describe(error);
        this.lastError = row.error;
        throw error;
      }
    });
    // chain FIFO regardless of this update's outcome
    this.updateQueue = result.then(
      () => undefined,
      () => undefined,
    );
    return result.finally(() => this.confirming.delete(id));
  }

  exportLog(): string {
    return this.logger.toXml();
  }

  private transition(row: SegmentRow, to: SegmentRow['status']): void {
    if (!canTransition(row.status, to)) {
      throw new Error(`illegal transition ${row.status} -> ${to} on segment ${row.id}`);
    }
    row.status = to;
  }
}

function splitOnce(line: string, sep: string): [string, string | null] {
  const index = line.indexOf(sep);
  if (index < 0) return [line, null];
  return [line.slice(0, index), line.slice(index + 1)];
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.status} ${error.code}: ${error.message}`;
  return error instanceof Error ? error.message : String(error);
}
