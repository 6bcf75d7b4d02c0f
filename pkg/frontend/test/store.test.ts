import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { SegmentStore } from '../src/store.js';
import { EffortLogger } from '../src/logger.js';
import { validateSettings } from '../src/types.js';
import { MockServer } from './mockServer.js';

const SETTINGS = validateSettings({
  serverUrl: 'http://test.local',
  username: 'alice',
  password: 'wonderland',
  projectId: 'demo',
  srcLang: 'en',
  tgtLang: 'xx',
  useMachineTranslation: true,
});

let server: MockServer;

function makeStore(opts: { failUpdates?: number } = {}): SegmentStore {
  server = new MockServer(opts);
  vi.stubGlobal('fetch', server.fetch);
  let clock = 1000;
  const logger = new EffortLogger(() => (clock += 100));
  return new SegmentStore(SETTINGS, logger);
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe('document loading', () => {
  it('parses one source per line', () => {
    const store = makeStore();
    store.loadDocument('the report is new.\nthe file is old.\n');
    expect(store.rows).toHaveLength(2);
    expect(store.rows[0]).toMatchObject({ id: 's1', status: 'untranslated', target: '' });
  });

  it('parses id<TAB>source lines', () => {
    const store = makeStore();
    store.loadDocument('a7\tthe report.\n');
    expect(store.rows[0]).toMatchObject({ id: 'a7', source: 'the report.' });
  });
});

describe('fetchTranslation', () => {
  it('fills the target cell and records focus', async () => {
    const store = makeStore();
    store.loadDocument('the report is new.');
    const row = await store.fetchTranslation('s1');
    expect(row.status).toBe('machine-translated');
    expect(row.target).toBe('MT(the report is new.)');
    expect(row.hypothesisId).toMatch(/^h/);
    expect(store.logger.allEvents().some((e) => e.kind === 'focus')).toBe(true);
  });

  it('does not re-request for non-untranslated rows', async () => {
    const store = makeStore();
    store.loadDocument('a.');
    await store.fetchTranslation('s1');
    await store.fetchTranslation('s1');
    expect(server.translateCalls).toBe(1);
  });

  it('skips the network entirely when use-MT is off', async () => {
    server = new MockServer();
    vi.stubGlobal('fetch', server.fetch);
    const store = new SegmentStore({ ...SETTINGS, useMachineTranslation: false });
    store.loadDocument('a.');
    const row = await store.fetchTranslation('s1');
    expect(row.status).toBe('untranslated');
    expect(server.translateCalls).toBe(0);
  });

  it('401 leaves the row unchanged and surfaces a banner error', async () => {
    server = new MockServer({ requireAuth: 'something-else' });
    vi.stubGlobal('fetch', server.fetch);
    const store = new SegmentStore(SETTINGS);
    store.loadDocument('a.');
    const row = await store.fetchTranslation('s1');
    expect(row.status).toBe('untranslated');
    expect(row.target).toBe('');
    expect(store.lastError).toContain('401');
  });
});

describe('editing and confirming', () => {
  it('confirm sends the edited text, not the original MT', async () => {
    const store = makeStore();
    store.loadDocument('the report is new.');
    await store.fetchTranslation('s1');
    store.edit('s1', 'el informe es nuevo.', 'x');
    await store.confirmSegment('s1');
    expect(server.updateBodies[0].post_edit).toBe('el informe es nuevo.');
    expect(server.updateBodies[0].src).toBe('the report is new.');
    expect(store.row('s1').status).toBe('confirmed');
  });

  it('confirming unedited MT sends the MT output as a zero-edit pair', async () => {
    const store = makeStore();
    store.loadDocument('a.');
    await store.fetchTranslation('s1');
    await store.confirmSegment('s1');
    expect(server.updateBodies[0].post_edit).toBe('MT(a.)');
  });

  it('rejects edits on confirmed or untranslated rows', async () => {
    const store = makeStore();
    store.loadDocument('a.\nb.');
    expect(() => store.edit('s1', 'zzz', 'z')).toThrow(/untranslated/);
    await store.fetchTranslation('s1');
    await store.confirmSegment('s1');
    expect(() => store.edit('s1', 'zzz', 'z')).toThrow(/confirmed/);
  });

  it('failed confirm keeps the row editable with a retry revision', async () => {
    const store = makeStore({ failUpdates: 1 });
    store.loadDocument('a.');
    await store.fetchTranslation('s1');
    store.edit('s1', 'edited', 'e');
    await expect(store.confirmSegment('s1')).rejects.toThrow();
    const row = store.row('s1');
    expect(row.status).toBe('editing');
    expect(row.revision).toBe(1);
    expect(row.error).toContain('500');
    // retry succeeds with a fresh idempotency key
    await store.confirmSegment('s1');
    expect(row.status).toBe('confirmed');
    expect(server.updateBodies.at(-1).segment_id).toBe('s1#r1');
  });

  it('updates queue FIFO with at most one in flight', async () => {
    const store = makeStore();
    store.loadDocument('a.\nb.\nc.');
    for (const id of ['s1', 's2', 's3']) await store.fetchTranslation(id);
    const acks = await Promise.all([
      store.confirmSegment('s1'),
      store.confirmSegment('s2'),
      store.confirmSegment('s3'),
    ]);
    expect(acks.map((a) => a.updatesApplied)).toEqual([1, 2, 3]);
    expect(server.updateBodies.map((b) => b.segment_id)).toEqual(['s1#r0', 's2#r0', 's3#r0']);
  });

  it('double confirm on one row is rejected while in flight', async () => {
    const store = makeStore();
    store.loadDocument('a.');
    await store.fetchTranslation('s1');
    const first = store.confirmSegment('s1');
    await expect(store.confirmSegment('s1')).rejects.toThrow(/in flight/);
    await first;
  });
});

describe('scripted end-to-end session', () => {
  it('5 segments: fetch, edit 2, confirm all; counters increase; log matches', async () => {
    const store = makeStore();
    store.loadDocument(['s one.', 's two.', 's three.', 's four.', 's five.'].join('\n'));
    expect(store.rows).toHaveLength(5);

    for (const row of store.rows) {
      await store.fetchTranslation(row.id);
      expect(row.status).toBe('machine-translated');
    }

    // edit segments 2 and 4: type 3 chars into one, 5 into the other
    for (const ch of 'abc') store.edit('s2', store.row('s2').target + ch, ch);
    for (const ch of 'hello') store.edit('s4', store.row('s4').target + ch, ch);

    const counters: number[] = [];
    for (const row of store.rows) {
      const ack = await store.confirmSegment(row.id);
      counters.push(ack.updatesApplied);
    }

    // five accepted updates with strictly increasing counters
    expect(server.updateCalls).toBe(5);
    expect(counters).toEqual([1, 2, 3, 4, 5]);
    expect(store.rows.every((r) => r.status === 'confirmed')).toBe(true);

    // exported log: keystroke counts match the scripted edits
    const xml = store.exportLog();
    expect(store.logger.keystrokeCount('s2')).toBe(3);
    expect(store.logger.keystrokeCount('s4')).toBe(5);
    expect(store.logger.keystrokeCount('s1')).toBe(0);
    const segment2 = xml.match(/<segment id="s2">([\s\S]*?)<\/segment>/)![1];
    expect(segment2!.match(/kind="keystroke"/g)).toHaveLength(3);
    const segment4 = xml.match(/<segment id="s4">([\s\S]*?)<\/segment>/)![1];
    expect(segment4!.match(/kind="keystroke"/g)).toHaveLength(5);
    // one confirm event per segment
    expect(xml.match(/kind="confirm"/g)).toHaveLength(5);
    // no plaintext credential anywhere in the export
    expect(xml).not.toContain('wonderland');
    expect(xml).not.toContain('alice');
  });
});
