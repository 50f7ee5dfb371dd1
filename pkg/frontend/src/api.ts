/** Session service client: thin, typed, careful about retries. */

import type {
  AnswerResult,
  Clusters,
  NextQuery,
  Relation,
  ServerState,
  SessionDescriptor,
} from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

/** 409: the answer conflicts with what earlier answers already imply. */
export class ContradictionError extends ApiError {}

/** 410: the query budget is spent or no candidates remain. */
export class BudgetSpentError extends ApiError {}

export interface ClientOptions {
  fetchFn?: typeof fetch;
  /** Attempts per request, network failures only. HTTP errors never retry. */
  attempts?: number;
  backoffMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const wait = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

async function decode(response: Response): Promise<unknown> {
  const body: unknown = await response.json().catch(() => ({}));
  if (response.ok) {
    return body;
  }
  const detail =
    typeof body === "object" && body !== null && "detail" in body
      ? String((body as { detail: unknown }).detail)
      : response.statusText;
  if (response.status === 409) {
    throw new ContradictionError(409, detail);
  }
  if (response.status === 410) {
    throw new BudgetSpentError(410, detail);
  }
  throw new ApiError(response.status, detail);
}

export class SessionClient {
  private readonly fetchFn: typeof fetch;
  private readonly attempts: number;
  private readonly backoffMs: number;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(readonly baseUrl: string, options: ClientOptions = {}) {
    this.fetchFn = options.fetchFn ?? fetch;
    this.attempts = options.attempts ?? 3;
    this.backoffMs = options.backoffMs ?? 300;
    this.sleep = options.sleep ?? wait;
  }

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  /** Fetch with backoff. Only safe for requests that can be repeated. */
  private async retrying(path: string, init?: RequestInit): Promise<unknown> {
    let failure: unknown;
    for (let attempt = 0; attempt < this.attempts; attempt++) {
      if (attempt > 0) {
        await this.sleep(this.backoffMs * 2 ** (attempt - 1));
      }
      try {
        return await decode(await this.fetchFn(this.url(path), init));
      } catch (error) {
        if (error instanceof ApiError) {
          throw error;
        }
        failure = error;
      }
    }
    throw failure;
  }

  /** Not retried: a lost response would leave an unnoticed spare session. */
  async create(config: unknown): Promise<SessionDescriptor> {
    const response = await this.fetchFn(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ config }),
    });
    return (await decode(response)) as SessionDescriptor;
  }

  async next(id: string): Promise<NextQuery> {
    return (await this.retrying(`/sessions/${id}/next`)) as NextQuery;
  }

  async state(id: string): Promise<ServerState> {
    return (await this.retrying(`/sessions/${id}/state`)) as ServerState;
  }

  async clusters(id: string): Promise<Clusters> {
    return (await this.retrying(`/sessions/${id}/clusters`)) as Clusters;
  }

  async remove(id: string): Promise<void> {
    try {
      await this.retrying(`/sessions/${id}`, { method: "DELETE" });
    } catch (error) {
      // A retried delete can find the session already gone.
      if (!(error instanceof ApiError && error.status === 404)) {
        throw error;
      }
    }
  }

  /**
   * Submit one judgment. A network failure here is ambiguous: the answer may
   * or may not have landed. Every accepted answer advances the spent count,
   * so the client re-reads state and only re-submits when spent still equals
   * the count observed before submission.
   */
  async answer(
    id: string,
    pair: [number, number],
    relation: Relation,
    spentBefore?: number,
  ): Promise<AnswerResult> {
    const baseline = spentBefore ?? (await this.state(id)).budget.spent;
    const init: RequestInit = {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ pair, relation }),
    };
    let failure: unknown;
    for (let attempt = 0; attempt < this.attempts; attempt++) {
      if (attempt > 0) {
        await this.sleep(this.backoffMs * 2 ** (attempt - 1));
        const seen = await this.state(id);
        if (seen.budget.spent !== baseline) {
          // Delivered after all; report the server's current picture.
          return {
            accepted: true,
            implied_constraints: 0,
            new_neighborhood: null,
            loop_completed: false,
            progress: {
              spent: seen.budget.spent,
              budget: seen.budget.total,
              loops: seen.loops,
              neighborhoods: seen.neighborhoods.length,
            },
          };
        }
      }
      try {
        return (await decode(await this.fetchFn(this.url(`/sessions/${id}/answer`), init))) as AnswerResult;
      } catch (error) {
        if (error instanceof ApiError) {
          throw error;
        }
        failure = error;
      }
    }
    throw failure;
  }
}
