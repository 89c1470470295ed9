// Typed client for the pvrag HTTP service. Everything the console shows
// comes out of these two endpoints; nothing is inferred client-side.

export interface EntityMention {
  id: string;
  name: string;
  surface: string;
  start: number;
  end: number;
}

export interface QueryAnswer {
  decision: string;
  explanation: string;
  pipeline: string;
  associated: boolean;
  entities: { drug: EntityMention; side_effect: EntityMention } | null;
  latency_ms: number;
  // verbose-only fields
  evidence?: string[];
  evidence_ids?: string[];
  prompt?: string;
  assertion?: string;
  raw_hits?: [string, number][] | null;
  backend?: string;
}

export interface SideEffectRow {
  name: string;
  soc_class: string | null;
}

export interface DrugSideEffects {
  drug: { id: string; name: string; atc_codes: string[] };
  count: number;
  side_effects: SideEffectRow[];
}

// status 0 means the request never reached the service (network failure);
// those are the retriable ones, along with 5xx.
export class ApiError extends Error {
  status: number;
  code: string;
  candidates: string[];

  constructor(message: string, status: number, code: string, candidates: string[] = []) {
    super(message);
    this.name = 'ApiError';
    this.status = status;
    this.code = code;
    this.candidates = candidates;
  }

  get retriable(): boolean {
    return this.status === 0 || this.status >= 500;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function errorFrom(res: Response): Promise<ApiError> {
  let code = 'http_error';
  let message = `request failed with status ${res.status}`;
  let candidates: string[] = [];
  try {
    const body = await res.json();
    if (body && body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
      candidates = body.error.candidates ?? [];
    }
  } catch {
    // non-JSON error body, keep the generic message
  }
  return new ApiError(message, res.status, code, candidates);
}

export class Client {
  private baseUrl: string;
  private fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, '');
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let res: Response;
    try {
      res = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`, 0, 'network');
    }
    if (!res.ok) {
      throw await errorFrom(res);
    }
    return res;
  }

  // Always verbose: the card needs the evidence trail.
  async query(question: string, pipeline: string): Promise<QueryAnswer> {
    const res = await this.request('/v1/query?verbose=1', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ question, pipeline }),
    });
    return (await res.json()) as QueryAnswer;
  }

  async sideEffects(name: string): Promise<DrugSideEffects> {
    const path = `/v1/drugs/${encodeURIComponent(name)}/side-effects`;
    const res = await this.request(path);
    return (await res.json()) as DrugSideEffects;
  }
}
