// Typed client over the workbench HTTP API. Every call surfaces the
// service's error envelope as ApiClientError so views can show the
// code and message verbatim.

export type Verdict3 = "Yes" | "No" | "Maybe";
export type Verdict4 = "Yes" | "No" | "Maybe" | "NA";

export interface ApiErrorBody {
  code: string;
  message: string;
  details?: unknown;
}

export class ApiClientError extends Error {
  readonly code: string;
  readonly status: number;
  readonly details: unknown;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.code;
    this.status = status;
    this.details = body.details;
  }
}

export interface CoverageReport {
  statements_total: number;
  statements_hit: number;
  fraction: number | null;
}

export interface AutoReport {
  has_sample_solution: boolean;
  solution_runnable: "Yes" | "No" | "NA";
  has_tests: boolean;
  tests_pass: "Yes" | "No" | "NA";
  coverage: CoverageReport;
  raw_coverage: CoverageReport;
}

export interface Bundle {
  id: string;
  raw_text: string;
  keywords: string[] | null;
  problem_statement: string | null;
  sample_solution: string | null;
  tests: string | null;
  warnings: string[];
}

export interface ManualRecord {
  bundle_id: string;
  rater_id: string;
  sensible: Verdict3;
  novel: Verdict3;
  solution_matches_statement: Verdict3;
  topic_matches_context: Verdict4;
  uses_function_or_class: Verdict4;
  uses_list_or_dictionary: Verdict4;
  notes: string;
}

export interface Resolution {
  record_id: string;
  bundle_id: string;
  field_name: string;
  resolved: "Yes" | "No";
  resolvers: string[];
  rationale: string;
}

export interface BundleView {
  bundle: Bundle;
  auto_report: AutoReport | null;
  manual_effective: Record<string, Verdict4> | null;
  manual_records: { record_id: string; record: ManualRecord }[];
  resolutions: Resolution[];
}

export interface PrimeInfo {
  id: string;
  keywords: string[];
  problem_statement: string;
}

export interface PrimesInfo {
  primes: PrimeInfo[];
  contexts: string[];
  concept_sets: Record<string, string[]>;
}

export interface JobDoc {
  job_id: string;
  kind: string;
  status: "pending" | "done" | "failed";
  result?: Record<string, unknown>;
  error?: ApiErrorBody;
}

export interface ExplanationDoc {
  explanation_id: string;
  explanation: {
    source_code: string;
    style: string;
    steps: string[];
    raw_text: string;
    warnings: string[];
  };
}

export interface Score {
  all_parts_explained: boolean;
  total_lines: number;
  correct_lines: number;
  accuracy: number;
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let body: ApiErrorBody = { code: "error", message: response.statusText };
    try {
      const parsed = (await response.json()) as { error?: ApiErrorBody };
      if (parsed.error) body = parsed.error;
    } catch {
      // keep the generic body
    }
    throw new ApiClientError(response.status, body);
  }
  return (await response.json()) as T;
}

export interface GenerateParams {
  prime_id: string;
  context: string | null;
  concept_set: string | null;
  concepts?: string[] | null;
  temperature: number;
  until_valid: boolean;
  budget: number;
}

export const api = {
  primes(): Promise<PrimesInfo> {
    return request<PrimesInfo>("/primes");
  },

  generate(params: GenerateParams): Promise<{ job_id: string }> {
    return request("/bundles:generate", {
      method: "POST",
      body: JSON.stringify(params),
    });
  },

  job(jobId: string): Promise<JobDoc> {
    return request(`/jobs/${jobId}`);
  },

  async waitForJob(jobId: string, pollMs = 150, timeoutMs = 60000): Promise<JobDoc> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const doc = await this.job(jobId);
      if (doc.status !== "pending") return doc;
      if (Date.now() > deadline) throw new ApiClientError(504, {
        code: "timeout",
        message: `job ${jobId} still pending after ${timeoutMs} ms`,
      });
      await new Promise((resolve) => setTimeout(resolve, pollMs));
    }
  },

  listBundles(): Promise<{ total: number; ids: string[] }> {
    return request("/bundles");
  },

  bundle(bundleId: string): Promise<BundleView> {
    return request(`/bundles/${bundleId}`);
  },

  evaluate(bundleId: string): Promise<{ bundle_id: string; report: AutoReport }> {
    return request(`/bundles/${bundleId}:evaluate`, { method: "POST" });
  },

  assess(
    bundleId: string,
    record: Omit<ManualRecord, "bundle_id">,
  ): Promise<{ record_id: string }> {
    return request(`/bundles/${bundleId}/assessment`, {
      method: "POST",
      body: JSON.stringify(record),
    });
  },

  resolve(
    recordId: string,
    field: string,
    resolved: "Yes" | "No",
    resolvers: string[],
    rationale: string,
  ): Promise<{ resolution_id: string }> {
    return request(`/assessments/${recordId}:resolve`, {
      method: "POST",
      body: JSON.stringify({ field, resolved, resolvers, rationale }),
    });
  },

  explain(code: string, samples = 1): Promise<{ job_id: string }> {
    return request("/explanations:generate", {
      method: "POST",
      body: JSON.stringify({ code, style: "step_by_step", n_samples: samples }),
    });
  },

  explanation(explanationId: string): Promise<ExplanationDoc> {
    return request(`/explanations/${explanationId}`);
  },

  judge(
    explanationId: string,
    judgments: { step_index: number; verdict: "Correct" | "Incorrect"; reason?: string }[],
    allParts: boolean,
  ): Promise<{ score: Score }> {
    return request(`/explanations/${explanationId}/judgments`, {
      method: "POST",
      body: JSON.stringify({ judgments, all_parts_explained: allParts }),
    });
  },

  async exportPack(filters: Record<string, string>): Promise<
    { empty: true; count: 0 } | { empty: false; count: number; blob: Blob }
  > {
    const query = new URLSearchParams(filters).toString();
    const response = await fetch(`/export${query ? `?${query}` : ""}`);
    if (!response.ok) {
      const parsed = (await response.json()) as { error: ApiErrorBody };
      throw new ApiClientError(response.status, parsed.error);
    }
    const contentType = response.headers.get("content-type") ?? "";
    if (contentType.includes("application/json")) {
      return { empty: true, count: 0 };
    }
    const count = Number(response.headers.get("x-pack-count") ?? "0");
    return { empty: false, count, blob: await response.blob() };
  },
};

export type Api = typeof api;
