import { afterEach, describe, expect, it, vi } from 'vitest';

import { ApiClient, ApiError } from '../src/api.js';
import { validateSettings } from '../src/types.js';
import { MockServer } from './mockServer.js';

const SETTINGS = validateSettings({
  serverUrl: 'http://test.local/',
  username: 'alice',
  password: 'wonderland',
  projectId: 'demo',
  srcLang: 'en',
  tgtLang: 'xx',
});

afterEach(() => vi.unstubAllGlobals());

describe('validateSettings', () => {
  it('rejects missing fields by name', () => {
    expect(() => validateSettings({ serverUrl: 'x' })).toThrow(/username/);
  });

  it('strips trailing slashes from the server url', () => {
    expect(SETTINGS.serverUrl).toBe('http://test.local');
  });
});

describe('ApiClient', () => {
  it('sends HTTP basic credentials', async () => {
    const expected = Buffer.from('alice:wonderland', 'utf-8').toString('base64');
    const server = new MockServer({ requireAuth: expected });
    vi.stubGlobal('fetch', server.fetch);
    const client = new ApiClient(SETTINGS);
    await expect(client.health()).resolves.toBeUndefined();
    const response = await client.translate('s1', 'hello.');
    expect(response.segments[0]!.tgt).toBe('MT(hello.)');
  });

  it('maps error payloads onto ApiError', async () => {
    const server = new MockServer({ requireAuth: 'other' });
    vi.stubGlobal('fetch', server.fetch);
    const client = new ApiClient(SETTINGS);
    try {
      await client.translate('s1', 'x');
      expect.unreachable();
    } catch (error) {
      expect(error).toBeInstanceOf(ApiError);
      expect((error as ApiError).status).toBe(401);
      expect((error as ApiError).code).toBe('unauthenticated');
    }
  });

  it('update carries the idempotency key as segment_id', async () => {
    const server = new MockServer();
    vi.stubGlobal('fetch', server.fetch);
    const client = new ApiClient(SETTINGS);
    const ack = await client.update('row9#r2', 'src.', 'edit.');
    expect(ack.accepted).toBe(true);
    expect(server.updateBodies[0].segment_id).toBe('row9#r2');
  });
});
