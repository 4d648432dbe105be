/**
 * Typed client for the hardbind HTTP API (/api/v1).
 *
 * Every displayed number in the UI comes from one of these response
 * shapes; the client never recomputes domain math. Mutations carry the
 * corpus version they were drafted against and surface 409s as
 * ConflictError so views can prompt a reload.
 */

export interface Meta {
  corpus_version: number;
  n_blocks: number;
  block_dim: number;
  n_scenes: number;
  schema: { categories: { name: string; values: string[] }[] };
}

export interface BlockSummary {
  block: number;
  n_concepts: number;
  live: number[];
  sentinel_present: boolean;
  deleted_to_single: boolean;
  masked: number[];
  mapped_factor: string | null;
}

export interface ConceptSummary {
  id: number;
  n_entries: number;
  population_share: number;
  masked: boolean;
}

export type Factors = Record<string, string | number[]>;

export interface MatchedSample {
  scene: number;
  slot: number;
  factors: Factors | null;
}

export interface ConceptCard {
  block: number;
  concept_id: number;
  prototype: number[];
  exemplars: number[][];
  matched: MatchedSample[];
  population_share: number;
}

export interface SimilarityEntry {
  id: number;
  distance: number;
}

export interface SimilarityReport {
  block: number;
  anchor: number;
  ranked: SimilarityEntry[];
}

export interface CompareResponse {
  first: ConceptCard;
  second: ConceptCard;
  prototype_distance: number;
}

export interface InterveneResponse {
  before: Factors;
  after: Factors;
  changed: string[];
  no_visible_effect: boolean;
}

export interface SceneObject {
  slot: number;
  factors: Factors;
}

export interface ScenesResponse {
  count: number;
  scenes: { scene: number; objects: SceneObject[] }[];
}

export interface InferResponse {
  scene: number;
  corpus_version: number;
  slots: { slot: number; concepts: number[]; probabilities: number[] | null }[];
}

export interface RevisionAction {
  block: number;
  action: string;
  [arg: string]: unknown;
}

export interface LogEntry {
  action: RevisionAction;
  actor: string;
  version_before: number;
  version_after: number;
  timestamp: string | null;
}

export interface SudokuRow {
  variant: string;
  k_empty: number;
  n_examples: number;
  count: number;
  solved_pct: number;
  digit_error_pct: number;
  mismatch_pct: number;
}

export interface SudokuReport {
  format: string;
  rows: SudokuRow[];
  corpus_version?: number;
}

export interface JobStatus {
  status: "running" | "done" | "failed";
  result?: SudokuReport;
  error?: string;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ConflictError extends ApiError {
  constructor(message: string) {
    super(409, message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(`${this.base}/api/v1${path}`, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = (await res.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      if (res.status === 409) throw new ConflictError(detail);
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  meta(): Promise<Meta> {
    return this.request("/meta");
  }

  blocks(): Promise<BlockSummary[]> {
    return this.request("/blocks");
  }

  concepts(block: number): Promise<ConceptSummary[]> {
    return this.request(`/blocks/${block}/concepts`);
  }

  card(block: number, concept: number, maxSamples = 12): Promise<ConceptCard> {
    return this.request(
      `/blocks/${block}/concepts/${concept}?max_samples=${maxSamples}`,
    );
  }

  similar(block: number, concept: number): Promise<SimilarityReport> {
    return this.request(`/blocks/${block}/concepts/${concept}/similar`);
  }

  compare(block: number, v1: number, v2: number): Promise<CompareResponse> {
    return this.request(`/blocks/${block}/compare?v1=${v1}&v2=${v2}`);
  }

  scenes(offset = 0, limit = 50): Promise<ScenesResponse> {
    return this.request(`/scenes?offset=${offset}&limit=${limit}`);
  }

  infer(scene: number): Promise<InferResponse> {
    return this.request(`/infer/${scene}`);
  }

  intervene(req: {
    scene: number;
    slot?: number;
    block: number;
    concept: number;
    entry?: number;
  }): Promise<InterveneResponse> {
    return this.post("/intervene", req);
  }

  revise(
    version: number,
    actor: string,
    action: RevisionAction,
  ): Promise<{ corpus_version: number }> {
    return this.post("/revise", { version, actor, action });
  }

  reviseDocument(
    version: number,
    actor: string,
    actions: RevisionAction[],
  ): Promise<{ corpus_version: number; applied: number }> {
    return this.post("/revise-document", {
      version,
      document: { schema: "feedback/1", actor, actions },
    });
  }

  log(): Promise<LogEntry[]> {
    return this.request("/log");
  }

  submitSudokuEval(req: {
    variant: string;
    k_empty?: number;
    n_examples?: number;
    count?: number;
    pipeline?: string;
    seed?: number;
  }): Promise<{ job_id: string }> {
    return this.post("/jobs/sudoku-eval", req);
  }

  jobStatus(jobId: string): Promise<JobStatus> {
    return this.request(`/jobs/${jobId}`);
  }

  async pollJob(
    jobId: string,
    intervalMs = 250,
    maxTries = 400,
  ): Promise<JobStatus> {
    for (let i = 0; i < maxTries; i++) {
      const status = await this.jobStatus(jobId);
      if (status.status !== "running") return status;
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
    throw new ApiError(408, `job ${jobId} still running after ${maxTries} polls`);
  }
}
