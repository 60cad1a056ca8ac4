/** Thin client for the engine API: retries transient failures with
 * exponential backoff, surfaces double-submits (409) as a typed outcome,
 * and tracks the engine generation so callers can refresh stale views. */

import {
  ClustersResponse,
  MetricsResponse,
  QueueNextResponse,
  Verdict,
  VerdictResponse,
} from './types.js';

export type SubmitOutcome =
  | { kind: 'accepted'; skipped: boolean }
  | { kind: 'conflict' };

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

export interface ClientOptions {
  baseUrl?: string;
  token?: string;
  /** retry attempts for network failures (not HTTP errors) */
  retries?: number;
  /** base delay; attempt i waits backoffMs * 2^i */
  backoffMs?: number;
  fetchFn?: typeof fetch;
  sleepFn?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class EngineClient {
  readonly baseUrl: string;
  private readonly token?: string;
  private readonly retries: number;
  private readonly backoffMs: number;
  private readonly fetchFn: typeof fetch;
  private readonly sleep: (ms: number) => Promise<void>;

  /** last generation seen in any response */
  generation = 0;
  /** fired when the engine moves to a new iteration */
  onGenerationChange?: (generation: number) => void;

  constructor(options: ClientOptions = {}) {
    this.baseUrl = (options.baseUrl ?? '').replace(/\/$/, '');
    this.token = options.token;
    this.retries = options.retries ?? 4;
    this.backoffMs = options.backoffMs ?? 250;
    this.fetchFn = options.fetchFn ?? fetch.bind(globalThis);
    this.sleep = options.sleepFn ?? defaultSleep;
  }

  async nextPair(): Promise<QueueNextResponse> {
    return this.request<QueueNextResponse>('/queue/next');
  }

  async submitVerdict(pairId: string, verdict: Verdict): Promise<SubmitOutcome> {
    try {
      const body = await this.request<VerdictResponse>(
        `/queue/${pairId}/verdict`,
        { method: 'POST', body: JSON.stringify({ verdict }) },
      );
      return { kind: 'accepted', skipped: body.skipped };
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        return { kind: 'conflict' };
      }
      throw err;
    }
  }

  async metrics(): Promise<MetricsResponse> {
    return this.request<MetricsResponse>('/metrics');
  }

  async clusters(): Promise<ClustersResponse> {
    return this.request<ClustersResponse>('/clusters');
  }

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const headers: Record<string, string> = {
      'content-type': 'application/json',
    };
    if (this.token) headers['x-auth-token'] = this.token;

    let lastError: unknown;
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      if (attempt > 0) await this.sleep(this.backoffMs * 2 ** (attempt - 1));
      let response: Response;
      try {
        response = await this.fetchFn(this.baseUrl + path, { ...init, headers });
      } catch (err) {
        lastError = err; // network loss: keep the card, retry with backoff
        continue;
      }
      if (!response.ok) {
        throw new ApiError(response.status, `${path} -> ${response.status}`);
      }
      const body = (await response.json()) as T & { generation?: number };
      this.noteGeneration(body.generation);
      return body;
    }
    throw lastError instanceof Error
      ? lastError
      : new Error(`network failure on ${path}`);
  }

  private noteGeneration(generation: number | undefined): void {
    if (typeof generation !== 'number' || generation <= this.generation) return;
    this.generation = generation;
    this.onGenerationChange?.(generation);
  }
}
