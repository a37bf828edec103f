/** Typed client for the evolution service's /v1 HTTP API. */

export interface SessionConfig {
  user_labels: string[];
  max_generations: number;
  rng_seed: number;
  scoring_mode: string;
  top_k?: number;
  max_pair_offspring?: number;
  max_generation_size?: number;
}

export interface SessionState {
  session_id: string;
  config: SessionConfig;
  status: "AwaitingSelection" | "Evolving" | "Done" | "Error";
  generation_count: number;
  selected: Record<string, string[]>;
  error: string | null;
}

export interface Provenance {
  parents: string[];
  operation: string;
  removed_group: string[];
  incoming_group: string[];
  incoming_origin: string | null;
  placement: string | null;
}

export interface ShapeEntry {
  id: string;
  rank: number;
  score: number | null;
  multi_functionality: number | null;
  labels: string[];
  categories: string[];
  part_count: number;
  provenance: Provenance | null;
  mesh_ref: string;
  thumb_ref: string;
}

export interface GenerationListing {
  session_id: string;
  index: number;
  status: string;
  selected: string[];
  user_labels: string[];
  shapes: ShapeEntry[];
}

export interface ApiError {
  code: string;
  message: string;
  detail: string;
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!resp.ok) {
      let detail = `${resp.status}`;
      try {
        const body = (await resp.json()) as ApiError;
        detail = `${body.code}: ${body.message}`;
      } catch {
        /* non-JSON error body */
      }
      throw new Error(detail);
    }
    return (await resp.json()) as T;
  }

  createSession(datasetDir: string, config: Partial<SessionConfig>): Promise<SessionState> {
    return this.request<SessionState>("/v1/sessions", {
      method: "POST",
      body: JSON.stringify({ dataset_dir: datasetDir, config }),
    });
  }

  getSession(sessionId: string): Promise<SessionState> {
    return this.request<SessionState>(`/v1/sessions/${sessionId}`);
  }

  getGeneration(sessionId: string, index: number): Promise<GenerationListing> {
    return this.request<GenerationListing>(`/v1/sessions/${sessionId}/generations/${index}`);
  }

  advance(sessionId: string, selected: string[], labels?: string[]): Promise<SessionState> {
    return this.request<SessionState>(`/v1/sessions/${sessionId}/advance`, {
      method: "POST",
      body: JSON.stringify({ selected, labels: labels ?? null }),
    });
  }

  meshUrl(ref: string): string {
    return `${this.baseUrl}/v1/shapes/${ref}`;
  }

  thumbUrl(ref: string): string {
    return `${this.baseUrl}/v1/shapes/${ref}`;
  }

  async fetchMeshText(ref: string): Promise<string> {
    const resp = await fetch(this.meshUrl(ref));
    if (!resp.ok) throw new Error(`mesh fetch failed: ${resp.status}`);
    return resp.text();
  }
}
