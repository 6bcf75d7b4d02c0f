/**
 * Client-side effort logging: keystrokes, mouse, focus and confirm events
 * per segment, exported as the server-side tooling's XML schema
 * (`<pelog version="1">`). Logging is local; nothing leaves the browser
 * until the user explicitly exports, and credentials never enter the log.
 */

export type EventKind = 'keystroke' | 'mouse' | 'focus' | 'confirm';

export interface LoggedEvent {
  kind: EventKind;
  t: number; // epoch milliseconds, UTC
  segmentId: string;
  key?: string;
  action?: string;
}

export class EffortLogger {
  private readonly events: LoggedEvent[] = [];
  private readonly clocks = new Map<string, number>();

  constructor(private readonly now: () => number = Date.now) {}

  private push(event: LoggedEvent): void {
    // timestamps must be non-decreasing within a segment
    const last = this.clocks.get(event.segmentId) ?? 0;
    if (event.t < last) event = { ...event, t: last };
    this.clocks.set(event.segmentId, event.t);
    this.events.push(event);
  }

  recordFocus(segmentId: string): void {
    this.push({ kind: 'focus', t: this.now(), segmentId });
  }

  recordInsert(segmentId: string, key: string): void {
    this.push({ kind: 'keystroke', t: this.now(), segmentId, key, action: 'insert' });
  }

  recordDelete(segmentId: string): void {
    this.push({ kind: 'keystroke', t: this.now(), segmentId, key: 'backspace', action: 'delete' });
  }

  recordPaste(segmentId: string, length: number): void {
    this.push({ kind: 'keystroke', t: this.now(), segmentId, key: String(length), action: 'paste' });
  }

  recordMouse(segmentId: string, action: string): void {
    this.push({ kind: 'mouse', t: this.now(), segmentId, action });
  }

  recordConfirm(segmentId: string): void {
    this.push({ kind: 'confirm', t: this.now(), segmentId });
  }

  keystrokeCount(segmentId: string): number {
    return this.events.filter((e) => e.kind === 'keystroke' && e.segmentId === segmentId).length;
  }

  allEvents(): readonly LoggedEvent[] {
    return this.events;
  }

  /** Serialize to pelog XML: segments in first-appearance order. */
  toXml(): string {
    if (this.events.length === 0) return '<pelog version="1" />';
    const order: string[] = [];
    const buckets = new Map<string, LoggedEvent[]>();
    for (const event of this.events) {
      if (!buckets.has(event.segmentId)) {
        buckets.set(event.segmentId, []);
        order.push(event.segmentId);
      }
      buckets.get(event.segmentId)!.push(event);
    }
    const lines: string[] = ['<pelog version="1">'];
    for (const segmentId of order) {
      lines.push(`  <segment id="${escapeXml(segmentId)}">`);
      for (const event of buckets.get(segmentId)!) {
        let attrs = `kind="${event.kind}" t="${event.t}"`;
        if (event.key !== undefined) attrs += ` key="${escapeXml(event.key)}"`;
        if (event.action !== undefined) attrs += ` action="${escapeXml(event.action)}"`;
        lines.push(`    <event ${attrs} />`);
      }
      lines.push('  </segment>');
    }
    lines.push('</pelog>');
    return lines.join('\n');
  }
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&apos;');
}
