// Page wiring: a linear flow from upload to results, one session object as
// the single source of truth, re-rendered region by region. No framework,
// no build-time templates, just the DOM.

import * as api from "./api.js";
import {
  type ConfigDraft,
  MODELS,
  MODES,
  STRATEGIES,
  TASK_KINDS,
  validateDraft,
} from "./config.js";
import { clear, h } from "./dom.js";
import {
  renderDiffs,
  renderError,
  renderImportance,
  renderPreview,
  renderProvenance,
  renderRunFacts,
  renderScoreCards,
  swap,
} from "./render.js";
import * as store from "./state.js";

const POLL_MS = 1000;
const TERMINAL = ["done", "failed"];

export function boot(doc: Document): void {
  const root = doc.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  new Page(doc, root).start();
}

function memoryStore(): store.StringStore {
  const map = new Map<string, string>();
  return {
    getItem: (key) => map.get(key) ?? null,
    setItem: (key, value) => void map.set(key, value),
  };
}

function pickStorage(doc: Document): store.StringStore {
  try {
    const ls = doc.defaultView?.localStorage;
    if (ls) return ls;
  } catch {
    // storage can be walled off entirely; fall through
  }
  return memoryStore();
}

function message(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

class Page {
  private session: store.SessionState;
  private readonly storage: store.StringStore;
  private readonly pollers = new Map<string, ReturnType<typeof setInterval>>();
  private selectedJob: string | null = null;
  private diffFilter = "all";

  // regions and controls, filled in by buildSkeleton
  private fileInput!: HTMLInputElement;
  private uploadBtn!: HTMLButtonElement;
  private uploadError!: HTMLElement;
  private previewRegion!: HTMLElement;
  private mappingRegion!: HTMLElement;
  private configErrors!: HTMLElement;
  private runBtn!: HTMLButtonElement;
  private jobsRegion!: HTMLElement;
  private scoresRegion!: HTMLElement;
  private provRegion!: HTMLElement;
  private tauRow!: HTMLElement;
  private clustersRow!: HTMLElement;
  private draftInputs!: Record<keyof ConfigDraft, HTMLInputElement | HTMLSelectElement>;

  constructor(private readonly doc: Document, private readonly root: HTMLElement) {
    this.storage = pickStorage(doc);
    this.session = store.loadState(this.storage);
  }

  start(): void {
    this.buildSkeleton();
    if (this.session.upload) {
      swap(this.previewRegion, renderPreview(this.doc, this.session.upload));
    }
    this.renderMapping();
    this.renderJobs();
    const withResults = this.session.jobs.find((j) => this.session.artifacts[j.id]);
    this.selectedJob = withResults ? withResults.id : null;
    this.renderResults();
    this.updateRunButton();

    // pick up where the last page load left off
    for (const job of this.session.jobs) {
      if (!TERMINAL.includes(job.state)) {
        this.startPolling(job.id);
      } else if (job.state === "done" && !this.session.artifacts[job.id]) {
        void this.fetchArtifacts(job.id);
      }
    }
  }

  private persist(): void {
    store.saveState(this.storage, this.session);
  }

  // ------------------------------------------------------------- skeleton

  private step(no: string, title: string, ...body: (Node | string)[]): HTMLElement {
    return h(
      this.doc,
      "section",
      { class: "step" },
      h(this.doc, "h2", {}, h(this.doc, "span", { class: "step-no" }, no), title),
      ...body,
    );
  }

  private buildSkeleton(): void {
    const doc = this.doc;
    clear(this.root);

    this.fileInput = h(doc, "input", {
      type: "file",
      id: "csv-file",
      accept: ".csv,text/csv",
    });
    this.uploadBtn = h(doc, "button", { id: "upload-btn", disabled: "" }, "Upload");
    this.uploadError = h(doc, "div", { id: "upload-error" });
    this.previewRegion = h(doc, "div", { id: "preview-region" });
    this.fileInput.addEventListener("change", () => {
      this.uploadBtn.disabled = !this.fileInput.files?.length;
    });
    this.uploadBtn.addEventListener("click", () => void this.onUpload());

    this.mappingRegion = h(doc, "div", { id: "mapping-region" });

    this.configErrors = h(doc, "div", { id: "config-errors", class: "error" });
    this.runBtn = h(doc, "button", { id: "run-btn", disabled: "" }, "Run enrichment");
    this.runBtn.addEventListener("click", () => void this.onRun());

    this.jobsRegion = h(doc, "div", { id: "jobs-region" });
    this.scoresRegion = h(doc, "div", { id: "scores-region" });
    this.provRegion = h(doc, "div", { id: "prov-region" });

    this.root.append(
      h(doc, "h1", {}, "tablelift"),
      h(
        doc,
        "p",
        {},
        "Join, select, align: enrich a CSV from an indexed table lake ",
        "and see whether the model actually improves.",
      ),
      this.step(
        "1",
        "Upload a table",
        h(doc, "div", { class: "field-row" }, this.fileInput, this.uploadBtn),
        this.uploadError,
        this.previewRegion,
      ),
      this.step("2", "Pick the join key and the prediction target", this.mappingRegion),
      this.step("3", "Tune the run", this.buildConfigForm()),
      this.step("4", "Run", h(doc, "div", { class: "field-row" }, this.runBtn), this.configErrors),
      this.step("5", "Watch the job", this.jobsRegion),
      this.step("6", "Scores", this.scoresRegion),
      this.step("7", "Provenance and prediction diffs", this.provRegion),
    );
  }

  // ------------------------------------------------------------ config form

  private field(
    label: string,
    control: HTMLInputElement | HTMLSelectElement,
  ): HTMLElement {
    const wrap = h(this.doc, "div", {});
    const tag = h(this.doc, "label", { for: control.id }, label);
    wrap.append(tag, control);
    return wrap;
  }

  private select(id: string, choices: readonly string[], value: string): HTMLSelectElement {
    const node = h(this.doc, "select", { id });
    for (const choice of choices) {
      const opt = h(this.doc, "option", { value: choice }, choice);
      if (choice === value) opt.setAttribute("selected", "");
      node.append(opt);
    }
    node.value = value;
    return node;
  }

  private numberInput(id: string, value: string, attrs: Record<string, string>): HTMLInputElement {
    const node = h(this.doc, "input", { type: "number", id, ...attrs });
    node.value = value;
    return node;
  }

  private buildConfigForm(): HTMLElement {
    const doc = this.doc;
    const draft = this.session.draft;

    const controls: Record<keyof ConfigDraft, HTMLInputElement | HTMLSelectElement> = {
      mode: this.select("cfg-mode", MODES, draft.mode),
      k: this.numberInput("cfg-k", draft.k, { min: "1", step: "1" }),
      m: this.numberInput("cfg-m", draft.m, { min: "1", step: "1" }),
      strategy: this.select("cfg-strategy", STRATEGIES, draft.strategy),
      tau: this.numberInput("cfg-tau", draft.tau, { step: "0.05" }),
      clusters: this.numberInput("cfg-clusters", draft.clusters, { min: "1", step: "1" }),
      model: this.select("cfg-model", MODELS, draft.model),
      folds: this.numberInput("cfg-folds", draft.folds, { min: "2", step: "1" }),
      seed: this.numberInput("cfg-seed", draft.seed, { min: "0", step: "1" }),
    };
    this.draftInputs = controls;

    this.tauRow = this.field("τ threshold", controls.tau);
    this.clustersRow = this.field("clusters", controls.clusters);

    const form = h(
      doc,
      "div",
      { id: "config-form" },
      h(
        doc,
        "div",
        { class: "field-row" },
        this.field("mode", controls.mode),
        this.field("k, join candidates per row", controls.k),
        this.field("m, tables kept", controls.m),
      ),
      h(
        doc,
        "div",
        { class: "field-row" },
        this.field("aggregation", controls.strategy),
        this.tauRow,
        this.clustersRow,
      ),
      h(
        doc,
        "div",
        { class: "field-row" },
        this.field("model", controls.model),
        this.field("CV folds", controls.folds),
        this.field("seed", controls.seed),
      ),
    );

    for (const control of Object.values(controls)) {
      control.addEventListener("input", () => this.onDraftEdit());
      control.addEventListener("change", () => this.onDraftEdit());
    }
    this.syncStrategyRows();
    return form;
  }

  private onDraftEdit(): void {
    const read = (key: keyof ConfigDraft) => this.draftInputs[key].value;
    const draft: ConfigDraft = {
      mode: read("mode"),
      k: read("k"),
      m: read("m"),
      strategy: read("strategy"),
      tau: read("tau"),
      clusters: read("clusters"),
      model: read("model"),
      folds: read("folds"),
      seed: read("seed"),
    };
    this.session = store.setDraft(this.session, draft);
    this.persist();
    this.syncStrategyRows();
  }

  private syncStrategyRows(): void {
    const strategy = this.session.draft.strategy;
    this.tauRow.style.display = strategy === "threshold" ? "" : "none";
    this.clustersRow.style.display = strategy === "soft" ? "" : "none";
  }

  // ---------------------------------------------------------------- upload

  private async onUpload(): Promise<void> {
    const file = this.fileInput.files?.[0];
    if (!file) return;
    this.uploadBtn.disabled = true;
    clear(this.uploadError);
    try {
      const resp = await api.uploadTable(file);
      this.session = store.setUpload(this.session, {
        token: resp.token,
        fileName: file.name,
        columns: resp.columns,
        rowCount: resp.row_count,
        preview: resp.preview,
      });
      this.persist();
      swap(this.previewRegion, renderPreview(this.doc, this.session.upload!));
      this.renderMapping();
    } catch (err) {
      swap(this.uploadError, renderError(this.doc, message(err)));
    } finally {
      this.uploadBtn.disabled = !this.fileInput.files?.length;
      this.updateRunButton();
    }
  }

  // --------------------------------------------------------------- mapping

  private renderMapping(): void {
    const doc = this.doc;
    clear(this.mappingRegion);
    const upload = this.session.upload;
    if (!upload) {
      this.mappingRegion.append(
        h(doc, "p", { class: "muted" }, "upload a table first"),
      );
      return;
    }
    const blank = ["", ...upload.columns];
    const keySelect = this.select("map-key", blank, this.session.keyColumn ?? "");
    const taskSelect = this.select("map-task", blank, this.session.taskColumn ?? "");
    const kindSelect = this.select("map-kind", TASK_KINDS, this.session.taskKind);
    const hint = h(doc, "p", { id: "mapping-hint", class: "error" });

    const onChange = () => {
      this.session = store.setMapping(
        this.session,
        keySelect.value || null,
        taskSelect.value || null,
        kindSelect.value,
      );
      this.persist();
      clear(hint);
      if (
        keySelect.value &&
        taskSelect.value &&
        keySelect.value === taskSelect.value
      ) {
        hint.append("key and target must be different columns");
      }
      this.updateRunButton();
    };
    for (const node of [keySelect, taskSelect, kindSelect]) {
      node.addEventListener("change", onChange);
    }

    this.mappingRegion.append(
      h(
        doc,
        "div",
        { class: "field-row" },
        this.field("join key column", keySelect),
        this.field("target column", taskSelect),
        this.field("task kind", kindSelect),
      ),
      hint,
    );
  }

  private updateRunButton(): void {
    this.runBtn.disabled = !store.canSubmit(this.session);
  }

  // ------------------------------------------------------------------- run

  private async onRun(): Promise<void> {
    clear(this.configErrors);
    if (!store.canSubmit(this.session)) return;
    const { errors, config } = validateDraft(this.session.draft);
    if (errors.length > 0 || config === null) {
      this.configErrors.append(errors.join("\n"));
      return;
    }
    const upload = this.session.upload!;
    this.runBtn.disabled = true;
    try {
      const id = await api.submitJob({
        table_token: upload.token,
        key_column: this.session.keyColumn!,
        task_column: this.session.taskColumn!,
        task_kind: this.session.taskKind,
        config,
      });
      this.session = store.upsertJob(this.session, {
        id,
        state: "queued",
        error: null,
        mode: String(config.mode),
        keyColumn: this.session.keyColumn!,
        taskColumn: this.session.taskColumn!,
        taskKind: this.session.taskKind,
        submittedAt: new Date().toISOString(),
      });
      this.persist();
      this.renderJobs();
      this.startPolling(id);
    } catch (err) {
      swap(this.configErrors, renderError(this.doc, message(err)));
    } finally {
      this.updateRunButton();
    }
  }

  // ------------------------------------------------------------------ jobs

  private startPolling(id: string): void {
    if (this.pollers.has(id)) return;
    this.pollers.set(id, setInterval(() => void this.pollOnce(id), POLL_MS));
  }

  private stopPolling(id: string): void {
    const timer = this.pollers.get(id);
    if (timer !== undefined) {
      clearInterval(timer);
      this.pollers.delete(id);
    }
  }

  private async pollOnce(id: string): Promise<void> {
    const card = this.session.jobs.find((j) => j.id === id);
    if (!card) {
      // dismissed while a poll was in flight
      this.stopPolling(id);
      return;
    }
    let snap: api.JobSnapshot;
    try {
      snap = await api.getJob(id);
    } catch (err) {
      if (err instanceof api.ApiError && err.status === 404) {
        this.stopPolling(id);
        this.session = store.upsertJob(this.session, {
          ...card,
          state: "failed",
          error: "job no longer known to the server",
        });
        this.persist();
        this.renderJobs();
      }
      return; // transient failures keep polling
    }
    if (snap.state !== card.state || snap.error !== card.error) {
      this.session = store.upsertJob(this.session, {
        ...card,
        state: snap.state,
        error: snap.error,
      });
      this.persist();
      this.renderJobs();
    }
    if (snap.state === "failed") this.stopPolling(id);
    if (snap.state === "done") {
      this.stopPolling(id);
      await this.fetchArtifacts(id);
    }
  }

  private async fetchArtifacts(id: string): Promise<void> {
    try {
      const [results, provenance, diffs] = await Promise.all([
        api.getResults(id),
        api.getProvenance(id),
        api.getDiffs(id, "all"),
      ]);
      this.session = store.putArtifacts(this.session, id, {
        results,
        provenance,
        diffs,
      });
      this.persist();
      if (this.selectedJob === null || this.selectedJob === id) {
        this.selectedJob = id;
        this.diffFilter = "all";
        this.renderResults();
      }
      this.renderJobs();
    } catch (err) {
      swap(this.scoresRegion, renderError(this.doc, message(err)));
    }
  }

  private dismiss(id: string): void {
    this.stopPolling(id);
    this.session = store.dismissJob(this.session, id);
    this.persist();
    if (this.selectedJob === id) {
      const fallback = this.session.jobs.find((j) => this.session.artifacts[j.id]);
      this.selectedJob = fallback ? fallback.id : null;
    }
    this.renderJobs();
    this.renderResults();
  }

  private renderJobs(): void {
    const doc = this.doc;
    clear(this.jobsRegion);
    if (this.session.jobs.length === 0) {
      this.jobsRegion.append(h(doc, "p", { class: "muted" }, "no jobs yet"));
      return;
    }
    const list = h(doc, "ul", { class: "jobs" });
    for (const job of this.session.jobs) {
      const dismissBtn = h(
        doc,
        "button",
        { class: "ghost dismiss", "aria-label": `dismiss job ${job.id}` },
        "×",
      );
      dismissBtn.addEventListener("click", (event) => {
        event.stopPropagation();
        this.dismiss(job.id);
      });
      const item = h(
        doc,
        "li",
        {
          class: `job-card${job.id === this.selectedJob ? " selected" : ""}`,
          "data-job-id": job.id,
          "data-state": job.state,
        },
        h(doc, "span", { class: "job-id" }, job.id.slice(0, 10)),
        h(doc, "span", { class: `badge state-${job.state}` }, job.state),
        h(
          doc,
          "span",
          {},
          `${job.taskColumn} from ${job.keyColumn} · ${job.taskKind} · ${job.mode}`,
        ),
        dismissBtn,
      );
      if (job.error) {
        item.append(h(doc, "div", { class: "error job-error" }, job.error));
      }
      item.addEventListener("click", () => {
        this.selectedJob = job.id;
        this.diffFilter = "all";
        this.renderJobs();
        this.renderResults();
      });
      list.append(item);
    }
    this.jobsRegion.append(list);
  }

  // --------------------------------------------------------------- results

  private renderResults(): void {
    const doc = this.doc;
    clear(this.scoresRegion);
    clear(this.provRegion);
    const id = this.selectedJob;
    const artifacts = id ? this.session.artifacts[id] : undefined;
    if (!id || !artifacts) {
      const note = h(doc, "p", { class: "muted" }, "no finished job selected");
      this.scoresRegion.append(note);
      this.provRegion.append(note.cloneNode(true));
      return;
    }

    this.scoresRegion.append(
      h(doc, "p", { class: "muted" }, `job ${id.slice(0, 10)}`),
      renderScoreCards(doc, artifacts.results),
      renderRunFacts(doc, artifacts.results),
      renderImportance(doc, artifacts.results),
      h(
        doc,
        "p",
        {},
        h(
          doc,
          "a",
          { href: api.enrichedCsvUrl(id), download: "enriched.csv" },
          "Download the enriched table (CSV)",
        ),
      ),
    );

    const diffBody = h(doc, "div", { id: "diff-region" });
    swap(diffBody, renderDiffs(doc, artifacts.diffs));
    const filter = this.select("diff-filter", ["all", "fixed", "broken"], this.diffFilter);
    filter.addEventListener("change", () => {
      void this.onDiffFilter(id, filter.value, diffBody);
    });
    this.provRegion.append(
      renderProvenance(doc, artifacts.provenance),
      h(doc, "h3", {}, "Prediction diffs"),
      h(doc, "div", { class: "field-row" }, this.field("show", filter)),
      diffBody,
    );
  }

  private async onDiffFilter(
    id: string,
    filter: string,
    region: HTMLElement,
  ): Promise<void> {
    this.diffFilter = filter;
    const cached = this.session.artifacts[id];
    if (filter === "all" && cached) {
      swap(region, renderDiffs(this.doc, cached.diffs));
      return;
    }
    try {
      swap(region, renderDiffs(this.doc, await api.getDiffs(id, filter)));
    } catch (err) {
      swap(region, renderError(this.doc, message(err)));
    }
  }
}

// Served pages boot themselves; tests import { boot } and drive it directly.
if (typeof document !== "undefined" && document.getElementById("app")) {
  boot(document);
}
