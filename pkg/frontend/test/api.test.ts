import { afterEach, describe, expect, test, vi } from 'vitest';

import { ApiClient } from '../src/api.js';

function mockFetch(status: number, body: unknown) {
  return vi.fn(async () => ({
    ok: status >= 200 && status < 300,
    status,
    statusText: String(status),
    json: async () => body,
  })) as unknown as typeof fetch;
}

afterEach(() => {
  vi.restoreAllMocks();
});

describe('api client', () => {
  test('status round-trips the snapshot', async () => {
    const snapshot = { iteration: 7, completed: false, incumbent: null };
    vi.stubGlobal('fetch', mockFetch(200, snapshot));
    const client = new ApiClient('http://x');
    expect(await client.status()).toEqual(snapshot);
  });

  test('trials unwraps the page envelope', async () => {
    vi.stubGlobal('fetch', mockFetch(200, { from: 2, trials: [{ iteration: 2 }], next: 3 }));
    const client = new ApiClient('http://x');
    expect(await client.trialsFrom(2)).toEqual([{ iteration: 2 }]);
  });

  test('accepted knowledge reports ok', async () => {
    vi.stubGlobal('fetch', mockFetch(202, {}));
    const client = new ApiClient('http://x');
    expect(await client.submitKnowledge({ kind: 'point' })).toEqual({ ok: true, status: 202 });
  });

  test('validation failures surface the server message verbatim', async () => {
    vi.stubGlobal('fetch', mockFetch(400, { error: 'x1: 99.0 outside [-5.0, 10.0]' }));
    const client = new ApiClient('http://x');
    const result = await client.submitKnowledge({});
    expect(result.ok).toBe(false);
    expect(result.status).toBe(400);
    expect(result.error).toBe('x1: 99.0 outside [-5.0, 10.0]');
  });

  test('completed runs reject mutations with 409', async () => {
    vi.stubGlobal('fetch', mockFetch(409, { error: 'run has completed' }));
    const client = new ApiClient('http://x');
    const result = await client.clearKnowledge();
    expect(result).toEqual({ ok: false, status: 409, error: 'run has completed' });
  });

  test('failed polls raise so the page can show the stale banner', async () => {
    vi.stubGlobal('fetch', mockFetch(500, {}));
    const client = new ApiClient('http://x');
    await expect(client.status()).rejects.toThrow('/status failed: 500');
  });
});
