// In-memory stand-in for the workbench HTTP API, faithful to the documented
// semantics: async jobs, Maybe consensus with 409 on conflict, zip export
// with the pack count header, JSON error envelopes.

export interface FakeBundle {
  id: string;
  raw_text: string;
  keywords: string[] | null;
  problem_statement: string | null;
  sample_solution: string | null;
  tests: string | null;
  warnings: string[];
  provenance: { prime_id: string; keyword_set: { contextual: string | null } };
}

interface StoredRecord {
  record_id: string;
  record: Record<string, unknown>;
}

interface StoredResolution {
  record_id: string;
  bundle_id: string;
  field_name: string;
  resolved: "Yes" | "No";
  resolvers: string[];
  rationale: string;
}

const REPORT = {
  has_sample_solution: true,
  solution_runnable: "Yes",
  has_tests: true,
  tests_pass: "Yes",
  coverage: { statements_total: 4, statements_hit: 4, fraction: 1.0 },
  raw_coverage: { statements_total: 4, statements_hit: 4, fraction: 1.0 },
};

export class FakeServer {
  bundles = new Map<string, FakeBundle>();
  reports = new Map<string, typeof REPORT>();
  records = new Map<string, StoredRecord[]>();
  resolutions: StoredResolution[] = [];
  explanations = new Map<string, { source_code: string; style: string; steps: string[]; raw_text: string; warnings: string[] }>();
  jobs = new Map<string, { job_id: string; kind: string; status: string; result?: unknown; error?: unknown }>();
  generateShouldFail = false;
  requests: string[] = [];
  private counter = 0;

  private nextId(prefix: string): string {
    this.counter += 1;
    return `${prefix}-${this.counter.toString().padStart(4, "0")}`;
  }

  private json(body: unknown, status = 200, headers: Record<string, string> = {}): Response {
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json", ...headers },
    });
  }

  private error(status: number, code: string, message: string): Response {
    return this.json({ error: { code, message, details: null } }, status);
  }

  fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = typeof input === "string" ? input : input.toString();
    const method = init?.method ?? "GET";
    const path = url.split("?")[0];
    const query = new URLSearchParams(url.includes("?") ? url.split("?")[1] : "");
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    this.requests.push(`${method} ${url}`);

    if (path === "/primes") {
      return this.json({
        primes: [
          { id: "speeding_check", keywords: ["cars"], problem_statement: "Write a function..." },
          { id: "converter", keywords: ["currency"], problem_statement: "Write a class..." },
        ],
        contexts: ["hiking", "fishing", "ice hockey"],
        concept_sets: { function: ["function"], class: ["class"] },
      });
    }

    if (path === "/bundles:generate" && method === "POST") {
      const jobId = this.nextId("job");
      if (this.generateShouldFail) {
        this.jobs.set(jobId, {
          job_id: jobId,
          kind: "generate",
          status: "failed",
          error: { code: "cassette_miss", message: "no cassette entry for prompt" },
        });
      } else {
        const bundleId = this.nextId("bundle") + "0".repeat(52);
        this.bundles.set(bundleId, {
          id: bundleId,
          raw_text: "Write a themed exercise...",
          keywords: body.context ? [body.context] : null,
          problem_statement: `Write a function themed around ${body.context ?? "anything"}.`,
          sample_solution: "def check(x):\n  return x > 5\n",
          tests: "class Test(unittest.TestCase):\n  def test_check(self): ...",
          warnings: [],
          provenance: {
            prime_id: body.prime_id,
            keyword_set: { contextual: body.context ?? null },
          },
        });
        this.reports.set(bundleId, REPORT);
        this.jobs.set(jobId, {
          job_id: jobId,
          kind: "generate",
          status: "done",
          result: { bundle_id: bundleId, attempts: body.until_valid ? 2 : 1 },
        });
      }
      return this.json({ job_id: jobId }, 202);
    }

    const jobMatch = path.match(/^\/jobs\/(.+)$/);
    if (jobMatch) {
      const job = this.jobs.get(jobMatch[1]);
      return job ? this.json(job) : this.error(404, "not_found", "job not found");
    }

    if (path === "/bundles" && method === "GET") {
      const ids = [...this.bundles.keys()].sort();
      return this.json({ total: ids.length, ids });
    }

    const evaluateMatch = path.match(/^\/bundles\/(.+):evaluate$/);
    if (evaluateMatch && method === "POST") {
      const bundle = this.bundles.get(evaluateMatch[1]);
      if (!bundle) return this.error(404, "not_found", "bundle not found");
      this.reports.set(bundle.id, REPORT);
      return this.json({ bundle_id: bundle.id, report: REPORT });
    }

    const assessMatch = path.match(/^\/bundles\/(.+)\/assessment$/);
    if (assessMatch && method === "POST") {
      const bundle = this.bundles.get(assessMatch[1]);
      if (!bundle) return this.error(404, "not_found", "bundle not found");
      const allowed = ["Yes", "No", "Maybe", "NA"];
      for (const field of ["sensible", "novel", "solution_matches_statement"]) {
        if (!allowed.slice(0, 3).includes(body[field])) {
          return this.error(400, "validation", `bad verdict for ${field}`);
        }
      }
      const recordId = this.nextId("manual");
      const list = this.records.get(bundle.id) ?? [];
      list.push({ record_id: recordId, record: { bundle_id: bundle.id, ...body } });
      this.records.set(bundle.id, list);
      return this.json({ record_id: recordId, bundle_id: bundle.id }, 201);
    }

    const bundleMatch = path.match(/^\/bundles\/([^/:]+)$/);
    if (bundleMatch && method === "GET") {
      const bundle = this.bundles.get(bundleMatch[1]);
      if (!bundle) return this.error(404, "not_found", "bundle not found");
      return this.json({
        bundle,
        auto_report: this.reports.get(bundle.id) ?? null,
        manual_effective: this.effective(bundle.id),
        manual_records: this.records.get(bundle.id) ?? [],
        resolutions: this.resolutions.filter((r) => r.bundle_id === bundle.id),
      });
    }

    const resolveMatch = path.match(/^\/assessments\/(.+):resolve$/);
    if (resolveMatch && method === "POST") {
      const recordId = resolveMatch[1];
      const holder = [...this.records.entries()].find(([, list]) =>
        list.some((r) => r.record_id === recordId),
      );
      if (!holder) return this.error(404, "not_found", "assessment not found");
      const record = holder[1].find((r) => r.record_id === recordId)!;
      if (record.record[body.field] !== "Maybe") {
        return this.error(400, "validation", `field ${body.field} is not Maybe`);
      }
      const existing = this.resolutions.find(
        (r) => r.record_id === recordId && r.field_name === body.field,
      );
      if (existing && existing.resolved !== body.resolved) {
        return this.error(409, "conflict", `already resolved to ${existing.resolved}`);
      }
      if (!existing) {
        this.resolutions.push({
          record_id: recordId,
          bundle_id: holder[0],
          field_name: body.field,
          resolved: body.resolved,
          resolvers: body.resolvers,
          rationale: body.rationale,
        });
      }
      return this.json({ resolution_id: `res-${recordId}-${body.field}` }, 201);
    }

    if (path === "/explanations:generate" && method === "POST") {
      const explanationId = this.nextId("explanation");
      this.explanations.set(explanationId, {
        source_code: body.code,
        style: body.style,
        steps: [
          "We define a function called check that takes a number.",
          "If the number is greater than 5 we return True.",
          "Otherwise we return False.",
        ],
        raw_text: "1. ...",
        warnings: [],
      });
      const jobId = this.nextId("job");
      this.jobs.set(jobId, {
        job_id: jobId,
        kind: "explain",
        status: "done",
        result: { explanation_ids: [explanationId] },
      });
      return this.json({ job_id: jobId }, 202);
    }

    const explanationMatch = path.match(/^\/explanations\/([^/:]+)$/);
    if (explanationMatch && method === "GET") {
      const doc = this.explanations.get(explanationMatch[1]);
      if (!doc) return this.error(404, "not_found", "explanation not found");
      return this.json({ explanation_id: explanationMatch[1], explanation: doc });
    }

    const judgeMatch = path.match(/^\/explanations\/(.+)\/judgments$/);
    if (judgeMatch && method === "POST") {
      const doc = this.explanations.get(judgeMatch[1]);
      if (!doc) return this.error(404, "not_found", "explanation not found");
      const judgments = body.judgments as { step_index: number; verdict: string }[];
      const indices = judgments.map((j) => j.step_index).sort((a, b) => a - b);
      const expected = doc.steps.map((_, i) => i + 1);
      if (JSON.stringify(indices) !== JSON.stringify(expected)) {
        return this.error(400, "validation", "judgments must cover every step exactly once");
      }
      const correct = judgments.filter((j) => j.verdict === "Correct").length;
      return this.json(
        {
          explanation_id: judgeMatch[1],
          score: {
            all_parts_explained: body.all_parts_explained,
            total_lines: doc.steps.length,
            correct_lines: correct,
            accuracy: correct / doc.steps.length,
          },
        },
        201,
      );
    }

    if (path === "/export" && method === "GET") {
      const wantPass = query.get("tests_pass");
      const wantSensible = query.get("sensible");
      const selected = [...this.bundles.keys()].sort().filter((id) => {
        const report = this.reports.get(id);
        if (wantPass && (!report || report.tests_pass !== wantPass)) return false;
        if (wantSensible) {
          const effective = this.effective(id);
          if (!effective || effective.sensible !== wantSensible) return false;
        }
        return true;
      });
      if (!selected.length) return this.json({ count: 0, empty: true, bundle_ids: [] });
      return new Response(new Blob([`PK-fake-${selected.join(",")}`]), {
        status: 200,
        headers: {
          "content-type": "application/zip",
          "x-pack-count": String(selected.length),
        },
      });
    }

    return this.error(404, "not_found", `no route for ${method} ${path}`);
  };

  private effective(bundleId: string): Record<string, string> | null {
    const list = this.records.get(bundleId);
    if (!list || !list.length) return null;
    const primary = list[0];
    const out: Record<string, string> = {};
    for (const field of [
      "sensible",
      "novel",
      "solution_matches_statement",
      "topic_matches_context",
      "uses_function_or_class",
      "uses_list_or_dictionary",
    ]) {
      const resolution = this.resolutions.find(
        (r) => r.record_id === primary.record_id && r.field_name === field,
      );
      out[field] = resolution ? resolution.resolved : String(primary.record[field]);
    }
    return out;
  }
}
