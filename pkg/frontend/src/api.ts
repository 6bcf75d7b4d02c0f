/** Thin JSON client for the translation server's HTTP API. */

import type {
  ApiErrorBody,
  TranslateResponse,
  UpdateResponse,
  WorkbenchSettings,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(private readonly settings: WorkbenchSettings) {}

  private authHeader(): string {
    // btoa is available in browsers; Buffer covers the node test runtime
    const raw = `${this.settings.username}:${this.settings.password}`;
    if (typeof btoa === 'function') return `Basic ${btoa(raw)}`;
    return `Basic ${Buffer.from(raw, 'utf-8').toString('base64')}`;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(`${this.settings.serverUrl}${path}`, {
      method,
      headers: {
        Authorization: this.authHeader(),
        ...(body !== undefined ? { 'Content-Type': 'application/json' } : {}),
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      throw new ApiError(response.status, 'bad_response', 'server returned non-JSON payload');
    }
    if (!response.ok) {
      const err = payload as ApiErrorBody;
      throw new ApiError(response.status, err.code ?? 'error', err.message ?? response.statusText);
    }
    return payload as T;
  }

  async health(): Promise<void> {
    await this.request<{ status: string }>('GET', '/api/v1/health');
  }

  async translate(segmentId: string, source: string): Promise<TranslateResponse> {
    return this.request<TranslateResponse>('POST', '/api/v1/translate', {
      project_id: this.settings.projectId,
      segments: [{ id: segmentId, src: source }],
    });
  }

  /** `idempotencyKey` is segment id + revision; retries must reuse it. */
  async update(idempotencyKey: string, source: string, postEdit: string): Promise<UpdateResponse> {
    return this.request<UpdateResponse>('POST', '/api/v1/update', {
      project_id: this.settings.projectId,
      segment_id: idempotencyKey,
      src: source,
      post_edit: postEdit,
    });
  }
}
