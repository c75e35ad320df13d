// Workbench application: hash-routed views over the HTTP API. Every view
// re-fetches from the API on render, so a hard refresh reconstructs the
// exact state from the URL plus server data.

import {
  api,
  ApiClientError,
  AutoReport,
  BundleView,
  PrimesInfo,
  Verdict3,
  Verdict4,
} from "./api.js";

type Route =
  | { kind: "generate" }
  | { kind: "bundle"; bundleId: string }
  | { kind: "bundles" }
  | { kind: "export" };

export function parseRoute(hash: string): Route {
  const parts = hash.replace(/^#\/?/, "").split("/").filter(Boolean);
  if (parts[0] === "bundles" && parts[1]) return { kind: "bundle", bundleId: parts[1] };
  if (parts[0] === "bundles") return { kind: "bundles" };
  if (parts[0] === "export") return { kind: "export" };
  return { kind: "generate" };
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function section(title: string, ...children: (Node | string)[]): HTMLElement {
  return el("section", { class: "panel" }, el("h2", {}, title), ...children);
}

function badge(label: string, value: string, tone: string): HTMLElement {
  return el(
    "span",
    { class: `badge badge-${tone}`, "data-badge": label },
    `${label}: ${value}`,
  );
}

function verdictTone(value: string): string {
  if (value === "Yes") return "good";
  if (value === "No") return "bad";
  if (value === "Maybe") return "warn";
  return "muted";
}

export function rubricBadges(report: AutoReport | null): HTMLElement {
  const host = el("div", { class: "badges", "data-testid": "rubric-badges" });
  if (!report) {
    host.append(badge("automated rubric", "not evaluated yet", "muted"));
    return host;
  }
  host.append(
    badge("has solution", report.has_sample_solution ? "Yes" : "No",
      report.has_sample_solution ? "good" : "bad"),
    badge("runnable", report.solution_runnable, verdictTone(report.solution_runnable)),
    badge("has tests", report.has_tests ? "Yes" : "No", report.has_tests ? "good" : "bad"),
    badge("tests pass", report.tests_pass, verdictTone(report.tests_pass)),
    badge(
      "coverage",
      report.coverage.fraction === null
        ? "n/a"
        : `${Math.round(report.coverage.fraction * 1000) / 10}%`,
      report.coverage.fraction === 1 ? "good" : "muted",
    ),
  );
  return host;
}

const MANUAL_FIELDS: { name: string; label: string; allowNa: boolean }[] = [
  { name: "sensible", label: "Sensible problem?", allowNa: false },
  { name: "novel", label: "Novel (no search hits)?", allowNa: false },
  { name: "solution_matches_statement", label: "Solution matches statement?", allowNa: false },
  { name: "topic_matches_context", label: "Topic matches context keyword?", allowNa: true },
  { name: "uses_function_or_class", label: "Uses function/class as primed?", allowNa: true },
  { name: "uses_list_or_dictionary", label: "Uses list/dictionary as primed?", allowNa: true },
];

export class App {
  private readonly root: HTMLElement;
  private primesInfo: PrimesInfo | null = null;
  private renderedHash: string | null = null;
  busy = false;

  constructor(root: HTMLElement) {
    this.root = root;
    window.addEventListener("hashchange", () => {
      // Skip the echo of a navigation this instance already rendered, so
      // in-flight form state is not wiped by a redundant re-render.
      if (window.location.hash !== this.renderedHash) void this.render();
    });
  }

  navigate(hash: string): Promise<void> {
    if (window.location.hash === hash) return this.render();
    window.location.hash = hash;
    // hashchange fires asynchronously; render now for deterministic tests.
    return this.render();
  }

  async render(): Promise<void> {
    this.renderedHash = window.location.hash;
    const route = parseRoute(window.location.hash);
    this.root.replaceChildren(this.header(route));
    const main = el("main", { id: "view" });
    this.root.append(main);
    try {
      if (route.kind === "generate") await this.renderGenerate(main);
      else if (route.kind === "bundle") await this.renderBundle(main, route.bundleId);
      else if (route.kind === "bundles") await this.renderBundleList(main);
      else await this.renderExport(main);
    } catch (error) {
      main.replaceChildren(this.errorBanner(error, () => void this.render()));
    }
  }

  private header(route: Route): HTMLElement {
    const nav = el(
      "nav",
      {},
      el("a", { href: "#/generate", "data-nav": "generate" }, "Generate"),
      el("a", { href: "#/bundles", "data-nav": "bundles" }, "Review"),
      el("a", { href: "#/export", "data-nav": "export" }, "Export"),
    );
    return el(
      "header",
      {},
      el("h1", {}, "Exercise workbench"),
      el("span", { class: "route", "data-testid": "route" }, route.kind),
      nav,
    );
  }

  private errorBanner(error: unknown, retry: () => void): HTMLElement {
    const message =
      error instanceof ApiClientError
        ? `${error.code}: ${error.message}`
        : String(error);
    const retryButton = el("button", { type: "button", "data-testid": "retry" }, "Retry");
    retryButton.addEventListener("click", retry);
    return el(
      "div",
      { class: "error", role: "alert", "data-testid": "error-banner" },
      el("strong", {}, "Request failed. "),
      message,
      " ",
      retryButton,
    );
  }

  private async primes(): Promise<PrimesInfo> {
    if (!this.primesInfo) this.primesInfo = await api.primes();
    return this.primesInfo;
  }

  // ---- generate view ----------------------------------------------------

  private async renderGenerate(main: HTMLElement): Promise<void> {
    const info = await this.primes();
    const form = el("form", { id: "generate-form" });

    const primeSelect = el("select", { name: "prime", id: "prime" });
    for (const prime of info.primes) {
      primeSelect.append(el("option", { value: prime.id }, prime.id));
    }

    const contextSelect = el("select", { name: "context", id: "context" });
    contextSelect.append(el("option", { value: "" }, "(no context)"));
    for (const context of info.contexts) {
      contextSelect.append(el("option", { value: context }, context));
    }
    const contextFree = el("input", {
      name: "context_free",
      id: "context-free",
      placeholder: "or type a custom context",
    });

    const conceptSelect = el("select", { name: "concept_set", id: "concept-set" });
    conceptSelect.append(el("option", { value: "" }, "(no concept set)"));
    for (const name of Object.keys(info.concept_sets)) {
      conceptSelect.append(el("option", { value: name }, name));
    }

    const temperature = el("input", {
      name: "temperature",
      id: "temperature",
      type: "number",
      step: "0.05",
      min: "0",
      max: "1",
      value: "0",
    });

    const untilValid = el("input", { type: "checkbox", id: "until-valid" });
    const budget = el("input", {
      type: "number", id: "budget", value: "5", min: "1",
    });

    const submit = el(
      "button",
      { type: "submit", id: "generate-button" },
      "Generate exercise",
    );
    const status = el("p", { id: "generate-status", "data-testid": "generate-status" });

    form.append(
      el("label", { for: "prime" }, "Seed exercise ", primeSelect),
      el("label", { for: "context" }, "Context keyword ", contextSelect, contextFree),
      el("label", { for: "concept-set" }, "Concept set ", conceptSelect),
      el("label", { for: "temperature" }, "Temperature ", temperature),
      el("label", { for: "until-valid" }, untilValid, " regenerate until tests pass, budget ", budget),
      submit,
      status,
    );

    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void (async () => {
        this.busy = true;
        status.textContent = "generating...";
        try {
          const context = contextFree.value.trim() || contextSelect.value || null;
          const job = await api.generate({
            prime_id: primeSelect.value,
            context,
            concept_set: conceptSelect.value || null,
            temperature: Number(temperature.value),
            until_valid: untilValid.checked,
            budget: Number(budget.value),
          });
          const done = await api.waitForJob(job.job_id);
          if (done.status === "failed") {
            throw new ApiClientError(500, done.error ?? {
              code: "job_failed", message: "generation failed",
            });
          }
          const bundleId = String(done.result?.bundle_id ?? "");
          await this.navigate(`#/bundles/${bundleId}`);
        } catch (error) {
          status.replaceChildren(this.errorBanner(error, () => form.requestSubmit()));
        } finally {
          this.busy = false;
        }
      })();
    });

    main.append(section("Generate", form));
  }

  // ---- bundle list --------------------------------------------------------

  private async renderBundleList(main: HTMLElement): Promise<void> {
    const listing = await api.listBundles();
    const list = el("ul", { id: "bundle-list" });
    for (const id of listing.ids) {
      list.append(
        el("li", {}, el("a", { href: `#/bundles/${id}` }, id.slice(0, 16))),
      );
    }
    main.append(
      section(`Stored bundles (${listing.total})`, listing.total ? list : "none yet"),
    );
  }

  // ---- bundle view ----------------------------------------------------------

  private async renderBundle(main: HTMLElement, bundleId: string): Promise<void> {
    const view = await api.bundle(bundleId);
    main.append(this.bundlePanels(view));
    main.append(this.assessmentPanel(view));
    main.append(this.consensusPanel(view));
    main.append(this.explanationPanel(view));
  }

  private bundlePanels(view: BundleView): HTMLElement {
    const bundle = view.bundle;
    const host = section("Bundle");
    host.append(
      el("p", { class: "bundle-id", "data-testid": "bundle-id" }, bundle.id),
      rubricBadges(view.auto_report),
    );
    if (view.manual_effective) {
      const manual = el("div", { class: "badges", "data-testid": "manual-badges" });
      for (const [field, value] of Object.entries(view.manual_effective)) {
        manual.append(badge(field, value, verdictTone(value)));
      }
      host.append(manual);
    }

    const actions = el("div", { class: "actions" });
    const evaluate = el("button", { type: "button", id: "evaluate-button" }, "Re-evaluate");
    evaluate.addEventListener("click", () => {
      void api.evaluate(bundle.id).then(() => this.render());
    });
    const regenerate = el(
      "button",
      { type: "button", id: "regenerate-button", title: "generate again with the same inputs until the tests pass" },
      "Regenerate until valid",
    );
    regenerate.addEventListener("click", () => {
      void this.regenerate(view);
    });
    actions.append(evaluate, regenerate);
    host.append(actions);

    for (const [label, text] of [
      ["Problem statement", bundle.problem_statement],
      ["Sample solution", bundle.sample_solution],
      ["Tests", bundle.tests],
    ] as const) {
      host.append(
        el(
          "details",
          { open: "true", class: "bundle-section" },
          el("summary", {}, label + (text ? "" : " (absent)")),
          el("pre", {}, text ?? ""),
        ),
      );
    }
    return host;
  }

  private async regenerate(view: BundleView): Promise<void> {
    const provenance = (view.bundle as unknown as {
      provenance?: {
        prime_id?: string;
        keyword_set?: { contextual?: string | null; programmatic?: string[] | null };
      };
    }).provenance;
    const job = await api.generate({
      prime_id: provenance?.prime_id ?? "speeding_check",
      context: provenance?.keyword_set?.contextual ?? null,
      concept_set: null,
      concepts: provenance?.keyword_set?.programmatic ?? null,
      temperature: 0,
      until_valid: true,
      budget: 5,
    });
    const done = await api.waitForJob(job.job_id);
    if (done.status === "done") {
      await this.navigate(`#/bundles/${String(done.result?.bundle_id ?? "")}`);
    }
  }

  // ---- assessment -------------------------------------------------------------

  private assessmentPanel(view: BundleView): HTMLElement {
    const form = el("form", { id: "assessment-form" });
    const rater = el("input", {
      id: "rater-id", name: "rater_id", placeholder: "rater id", value: "instructor",
    });
    form.append(el("label", { for: "rater-id" }, "Rater ", rater));

    for (const field of MANUAL_FIELDS) {
      const group = el("fieldset", { class: "verdict-group", "data-field": field.name });
      group.append(el("legend", {}, field.label));
      const options: string[] = field.allowNa
        ? ["Yes", "No", "Maybe", "NA"]
        : ["Yes", "No", "Maybe"];
      for (const option of options) {
        const input = el("input", {
          type: "radio",
          name: field.name,
          value: option,
          id: `${field.name}-${option}`,
        }) as HTMLInputElement;
        if (option === "Yes") input.checked = true;
        group.append(
          el("label", { for: `${field.name}-${option}`, class: "verdict-option" }, input, option),
        );
      }
      form.append(group);
    }

    const notes = el("textarea", { id: "notes", name: "notes", placeholder: "notes" });
    const submit = el("button", { type: "submit", id: "assess-button" }, "Record assessment");
    const status = el("p", { "data-testid": "assess-status" });
    form.append(el("label", { for: "notes" }, "Notes ", notes), submit, status);

    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const data = new FormData(form);
      void (async () => {
        try {
          await api.assess(view.bundle.id, {
            rater_id: String(data.get("rater_id") || "instructor"),
            sensible: data.get("sensible") as Verdict3,
            novel: data.get("novel") as Verdict3,
            solution_matches_statement: data.get("solution_matches_statement") as Verdict3,
            topic_matches_context: data.get("topic_matches_context") as Verdict4,
            uses_function_or_class: data.get("uses_function_or_class") as Verdict4,
            uses_list_or_dictionary: data.get("uses_list_or_dictionary") as Verdict4,
            notes: String(data.get("notes") || ""),
          });
          await this.render();
        } catch (error) {
          status.replaceChildren(this.errorBanner(error, () => form.requestSubmit()));
        }
      })();
    });

    return section("Manual assessment", form);
  }

  private consensusPanel(view: BundleView): HTMLElement {
    const host = section("Recorded assessments");
    if (!view.manual_records.length) {
      host.append(el("p", {}, "no assessments recorded yet"));
      return host;
    }
    for (const { record_id, record } of view.manual_records) {
      const item = el("div", { class: "record", "data-record": record_id });
      item.append(el("h3", {}, `${record.rater_id} (${record_id})`));
      const list = el("ul", {});
      for (const field of MANUAL_FIELDS) {
        const value = record[field.name as keyof typeof record] as string;
        const entry = el("li", { "data-field-value": `${field.name}=${value}` },
          `${field.name}: ${value} `);
        const resolution = view.resolutions.find(
          (r) => r.record_id === record_id && r.field_name === field.name,
        );
        if (resolution) {
          entry.append(
            badge("consensus", resolution.resolved, verdictTone(resolution.resolved)),
            el("em", { class: "resolver-note" },
              ` by ${resolution.resolvers.join(", ")}: ${resolution.rationale}`),
          );
        } else if (value === "Maybe") {
          entry.append(this.resolveControl(record_id, field.name));
        }
        list.append(entry);
      }
      if (record.notes) list.append(el("li", { class: "notes" }, `notes: ${record.notes}`));
      item.append(list);
      host.append(item);
    }
    return host;
  }

  private resolveControl(recordId: string, field: string): HTMLElement {
    const host = el("span", { class: "resolve-control", "data-resolve": `${recordId}:${field}` });
    const resolvers = el("input", {
      class: "resolvers",
      placeholder: "resolver ids, comma separated",
      value: "",
    }) as HTMLInputElement;
    const rationale = el("input", {
      class: "rationale", placeholder: "rationale",
    }) as HTMLInputElement;
    const yes = el("button", { type: "button", class: "resolve-yes" }, "Resolve Yes");
    const no = el("button", { type: "button", class: "resolve-no" }, "Resolve No");
    const status = el("span", { class: "resolve-status" });

    const submit = (verdict: "Yes" | "No") => {
      const names = resolvers.value.split(",").map((s) => s.trim()).filter(Boolean);
      void api
        .resolve(recordId, field, verdict, names, rationale.value)
        .then(() => this.render())
        .catch((error) => {
          status.replaceChildren(this.errorBanner(error, () => submit(verdict)));
        });
    };
    yes.addEventListener("click", () => submit("Yes"));
    no.addEventListener("click", () => submit("No"));
    host.append(resolvers, rationale, yes, no, status);
    return host;
  }

  // ---- explanations ---------------------------------------------------------

  private explanationPanel(view: BundleView): HTMLElement {
    const host = section("Explanation");
    if (!view.bundle.sample_solution) {
      host.append(el("p", {}, "no sample solution to explain"));
      return host;
    }
    const button = el("button", { type: "button", id: "explain-button" }, "Explain solution");
    const target = el("div", { id: "explanation-target" });
    button.addEventListener("click", () => {
      void (async () => {
        const job = await api.explain(view.bundle.sample_solution ?? "");
        const done = await api.waitForJob(job.job_id);
        if (done.status === "failed") {
          target.replaceChildren(this.errorBanner(
            new ApiClientError(500, done.error ?? { code: "job_failed", message: "failed" }),
            () => button.click(),
          ));
          return;
        }
        const ids = (done.result?.explanation_ids ?? []) as string[];
        if (ids.length) await this.renderJudging(target, ids[0]);
      })();
    });
    host.append(button, target);
    return host;
  }

  private async renderJudging(target: HTMLElement, explanationId: string): Promise<void> {
    const doc = await api.explanation(explanationId);
    const form = el("form", { id: "judgment-form", "data-explanation": explanationId });
    doc.explanation.steps.forEach((step, index) => {
      const group = el("fieldset", { class: "step", "data-step": String(index + 1) });
      group.append(el("legend", {}, `${index + 1}. ${step}`));
      for (const option of ["Correct", "Incorrect"] as const) {
        const input = el("input", {
          type: "radio",
          name: `step-${index + 1}`,
          value: option,
          id: `step-${index + 1}-${option}`,
          title:
            option === "Correct"
              ? "every claim in the step is true of the code"
              : "mark incorrect for reversed comparisons, unqualified elif branches, or wrong control-flow claims",
        }) as HTMLInputElement;
        if (option === "Correct") input.checked = true;
        group.append(el("label", { for: `step-${index + 1}-${option}` }, input, option));
      }
      form.append(group);
    });
    const allParts = el("input", { type: "checkbox", id: "all-parts" }) as HTMLInputElement;
    allParts.checked = true;
    const submit = el("button", { type: "submit", id: "judge-button" }, "Record judgments");
    const scorePanel = el("p", { id: "score-panel", "data-testid": "score-panel" });
    form.append(
      el("label", { for: "all-parts" }, allParts, " all parts of the code are explained"),
      submit,
      scorePanel,
    );
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const data = new FormData(form);
      const judgments = doc.explanation.steps.map((_, index) => ({
        step_index: index + 1,
        verdict: (data.get(`step-${index + 1}`) ?? "Correct") as "Correct" | "Incorrect",
      }));
      void api
        .judge(explanationId, judgments, allParts.checked)
        .then(({ score }) => {
          scorePanel.textContent =
            `${score.correct_lines}/${score.total_lines} lines correct ` +
            `(${Math.round(score.accuracy * 1000) / 10}%)`;
        })
        .catch((error) => {
          scorePanel.replaceChildren(this.errorBanner(error, () => form.requestSubmit()));
        });
    });
    target.replaceChildren(form);
  }

  // ---- export --------------------------------------------------------------

  private async renderExport(main: HTMLElement): Promise<void> {
    const form = el("form", { id: "export-form" });
    const testsPass = el("select", { id: "filter-tests-pass", name: "tests_pass" });
    for (const option of ["", "Yes", "No"]) {
      testsPass.append(el("option", { value: option }, option || "(any)"));
    }
    const sensible = el("select", { id: "filter-sensible", name: "sensible" });
    for (const option of ["", "Yes", "No"]) {
      sensible.append(el("option", { value: option }, option || "(any)"));
    }
    const submit = el("button", { type: "submit", id: "export-button" }, "Export pack");
    const status = el("p", { id: "export-status", "data-testid": "export-status" });
    form.append(
      el("label", { for: "filter-tests-pass" }, "tests pass ", testsPass),
      el("label", { for: "filter-sensible" }, "sensible ", sensible),
      submit,
      status,
    );
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const filters: Record<string, string> = {};
      if (testsPass.value) filters.tests_pass = testsPass.value;
      if (sensible.value) filters.sensible = sensible.value;
      void api
        .exportPack(filters)
        .then((outcome) => {
          status.textContent = outcome.empty
            ? "no bundles matched the filter"
            : `exported ${outcome.count} exercise(s)`;
          if (!outcome.empty && typeof URL.createObjectURL === "function") {
            const url = URL.createObjectURL(outcome.blob);
            const link = el("a", { href: url, download: "exercise-pack.zip" }, "download pack");
            status.append(" ", link);
          }
        })
        .catch((error) => {
          status.replaceChildren(this.errorBanner(error, () => form.requestSubmit()));
        });
    });
    main.append(section("Export accepted exercises", form));
  }
}

export function mount(root: HTMLElement): App {
  const app = new App(root);
  void app.render();
  return app;
}
