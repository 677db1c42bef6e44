// Typed client of the review service. The console computes no verdicts
// and no similarity scores of its own; everything displayed comes out of
// these responses.

export interface RecordSummary {
  id: string;
  problem: string;
  status: string;
  provenance: string;
  answer: string;
  gold_answer: string | null;
  reasoning: string;
  created_at: string;
  updated_at: string;
  revision_count: number;
}

export interface Revision {
  response: string;
  reasoning: string;
  answer: string;
  provenance: string;
  timestamp: string;
}

export interface RecordDetail extends RecordSummary {
  response: string;
  task_meta: Record<string, string>;
  revisions: Revision[];
}

export interface SearchHit {
  record_id: string;
  rank: number;
  score: number;
  status: string;
  problem: string;
}

export interface Stats {
  counts: Record<string, number>;
  size: number;
  dim: number;
  last_eval: { baseline_accuracy?: number; augmented_accuracy?: number; delta_points?: number } | null;
}

export interface Paged<T> {
  items: T[];
  total: number;
}

/** A non-2xx response, carrying the service's stable error code. */
export class ApiFailure extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(readonly base: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(`${this.base}${path}`, init);
    if (!response.ok) {
      let code = "unknown";
      let message = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { code?: string; message?: string };
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        // non-JSON error body; keep the defaults
      }
      throw new ApiFailure(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  records(status?: string, limit = 50, offset = 0): Promise<Paged<RecordSummary>> {
    const params = new URLSearchParams({ limit: String(limit), offset: String(offset) });
    if (status) params.set("status", status);
    return this.request(`/api/records?${params}`);
  }

  record(id: string): Promise<RecordDetail> {
    return this.request(`/api/records/${encodeURIComponent(id)}`);
  }

  queue(): Promise<Paged<RecordDetail>> {
    return this.request("/api/queue");
  }

  submitCorrection(id: string, reasoning: string, answer: string): Promise<RecordDetail> {
    return this.request(`/api/queue/${encodeURIComponent(id)}/correction`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ reasoning, answer }),
    });
  }

  search(q: string, k = 3): Promise<Paged<SearchHit>> {
    const params = new URLSearchParams({ q, k: String(k) });
    return this.request(`/api/search?${params}`);
  }

  stats(): Promise<Stats> {
    return this.request("/api/stats");
  }
}
