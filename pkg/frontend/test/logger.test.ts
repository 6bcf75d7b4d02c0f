import { describe, expect, it } from 'vitest';

import { EffortLogger } from '../src/logger.js';

function clockedLogger(start = 0, step = 10): EffortLogger {
  let t = start;
  return new EffortLogger(() => (t += step));
}

describe('EffortLogger', () => {
  it('empty session exports the empty document', () => {
    expect(new EffortLogger().toXml()).toBe('<pelog version="1" />');
  });

  it('groups events by segment in first-appearance order', () => {
    const logger = clockedLogger();
    logger.recordFocus('b');
    logger.recordFocus('a');
    logger.recordInsert('b', 'x');
    const xml = logger.toXml();
    expect(xml.indexOf('<segment id="b">')).toBeLessThan(xml.indexOf('<segment id="a">'));
    expect(xml.match(/<segment /g)).toHaveLength(2);
  });

  it('timestamps are non-decreasing within a segment', () => {
    let calls = 0;
    const times = [100, 50, 200]; // middle one goes backwards
    const logger = new EffortLogger(() => times[calls++] ?? 999);
    logger.recordFocus('s1');
    logger.recordInsert('s1', 'a');
    logger.recordConfirm('s1');
    const ts = logger
      .allEvents()
      .filter((e) => e.segmentId === 's1')
      .map((e) => e.t);
    expect(ts).toEqual([...ts].sort((x, y) => x - y));
  });

  it('escapes XML-significant characters in keys and ids', () => {
    const logger = clockedLogger();
    logger.recordInsert('s<1>', '"&\'');
    const xml = logger.toXml();
    expect(xml).toContain('id="s&lt;1&gt;"');
    expect(xml).toContain('key="&quot;&amp;&apos;"');
  });

  it('records logical edit operations with their payloads', () => {
    const logger = clockedLogger();
    logger.recordInsert('s1', 'q');
    logger.recordDelete('s1');
    logger.recordPaste('s1', 12);
    const xml = logger.toXml();
    expect(xml).toContain('key="q" action="insert"');
    expect(xml).toContain('action="delete"');
    expect(xml).toContain('key="12" action="paste"');
    expect(logger.keystrokeCount('s1')).toBe(3);
  });

  it('mouse and confirm events carry no key payload', () => {
    const logger = clockedLogger();
    logger.recordMouse('s1', 'click');
    logger.recordConfirm('s1');
    const xml = logger.toXml();
    expect(xml).toContain('kind="mouse"');
    expect(xml).toContain('action="click"');
    expect(xml).toContain('kind="confirm"');
  });
});
