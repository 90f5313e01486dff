// Session state: everything the page needs to rebuild itself after a reload.
// Mutators are pure functions returning a new state so they unit-test cleanly.

import type {
  DiffsPayload,
  ProvenanceEntry,
  ResultsPayload,
} from "./api.js";
import { type ConfigDraft, defaultDraft, TASK_KINDS } from "./config.js";

export interface UploadInfo {
  token: string;
  fileName: string;
  columns: string[];
  rowCount: number;
  preview: string[][];
}

export interface JobCard {
  id: string;
  state: string;
  error: string | null;
  mode: string;
  keyColumn: string;
  taskColumn: string;
  taskKind: string;
  submittedAt: string;
}

// Fetched once per finished job and kept so a reload does not refetch.
export interface JobArtifacts {
  results: ResultsPayload;
  provenance: ProvenanceEntry[];
  diffs: DiffsPayload;
}

export interface SessionState {
  upload: UploadInfo | null;
  keyColumn: string | null;
  taskColumn: string | null;
  taskKind: string;
  draft: ConfigDraft;
  jobs: JobCard[]; // newest first
  artifacts: Record<string, JobArtifacts>;
}

export function freshState(): SessionState {
  return {
    upload: null,
    keyColumn: null,
    taskColumn: null,
    taskKind: "regression",
    draft: defaultDraft(),
    jobs: [],
    artifacts: {},
  };
}

const STORAGE_KEY = "tablelift-session-v1";

// localStorage signature subset, swappable in tests.
export interface StringStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export function saveState(store: StringStore, state: SessionState): void {
  store.setItem(STORAGE_KEY, JSON.stringify(state));
}

export function loadState(store: StringStore): SessionState {
  let raw: string | null = null;
  try {
    raw = store.getItem(STORAGE_KEY);
  } catch {
    return freshState();
  }
  if (!raw) return freshState();
  try {
    return normalize(JSON.parse(raw));
  } catch {
    return freshState();
  }
}

// Anything that does not look like a state this version wrote falls back to
// a fresh session rather than a half-broken one.
function normalize(parsed: unknown): SessionState {
  const base = freshState();
  if (typeof parsed !== "object" || parsed === null) return base;
  const p = parsed as Record<string, unknown>;

  const upload = p.upload as UploadInfo | null | undefined;
  if (
    upload &&
    typeof upload.token === "string" &&
    Array.isArray(upload.columns) &&
    Array.isArray(upload.preview)
  ) {
    base.upload = {
      token: upload.token,
      fileName: String(upload.fileName ?? ""),
      columns: upload.columns.map(String),
      rowCount: Number(upload.rowCount ?? 0),
      preview: upload.preview.map((row) =>
        Array.isArray(row) ? row.map(String) : [],
      ),
    };
  }
  if (typeof p.keyColumn === "string") base.keyColumn = p.keyColumn;
  if (typeof p.taskColumn === "string") base.taskColumn = p.taskColumn;
  if ((TASK_KINDS as readonly string[]).includes(p.taskKind as string)) {
    base.taskKind = p.taskKind as string;
  }
  if (typeof p.draft === "object" && p.draft !== null) {
    const draft = p.draft as Record<string, unknown>;
    for (const key of Object.keys(base.draft) as (keyof ConfigDraft)[]) {
      if (typeof draft[key] === "string") base.draft[key] = draft[key] as string;
    }
  }
  if (Array.isArray(p.jobs)) {
    base.jobs = p.jobs
      .filter(
        (j): j is JobCard =>
          typeof j === "object" && j !== null &&
          typeof (j as JobCard).id === "string" &&
          typeof (j as JobCard).state === "string",
      )
      .map((j) => ({
        id: j.id,
        state: j.state,
        error: typeof j.error === "string" ? j.error : null,
        mode: String(j.mode ?? ""),
        keyColumn: String(j.keyColumn ?? ""),
        taskColumn: String(j.taskColumn ?? ""),
        taskKind: String(j.taskKind ?? ""),
        submittedAt: String(j.submittedAt ?? ""),
      }));
  }
  if (typeof p.artifacts === "object" && p.artifacts !== null) {
    const known = new Set(base.jobs.map((j) => j.id));
    for (const [id, value] of Object.entries(p.artifacts)) {
      if (known.has(id) && typeof value === "object" && value !== null) {
        base.artifacts[id] = value as JobArtifacts;
      }
    }
  }
  return base;
}

// ---------------------------------------------------------------- mutators

export function setUpload(state: SessionState, info: UploadInfo): SessionState {
  // a new table invalidates the old column picks
  return { ...state, upload: info, keyColumn: null, taskColumn: null };
}

export function setMapping(
  state: SessionState,
  keyColumn: string | null,
  taskColumn: string | null,
  taskKind: string,
): SessionState {
  return { ...state, keyColumn, taskColumn, taskKind };
}

export function setDraft(state: SessionState, draft: ConfigDraft): SessionState {
  return { ...state, draft: { ...draft } };
}

export function upsertJob(state: SessionState, card: JobCard): SessionState {
  const rest = state.jobs.filter((j) => j.id !== card.id);
  const existing = state.jobs.find((j) => j.id === card.id);
  const jobs = existing
    ? state.jobs.map((j) => (j.id === card.id ? card : j))
    : [card, ...rest];
  return { ...state, jobs };
}

export function dismissJob(state: SessionState, id: string): SessionState {
  const artifacts = { ...state.artifacts };
  delete artifacts[id];
  return { ...state, jobs: state.jobs.filter((j) => j.id !== id), artifacts };
}

export function putArtifacts(
  state: SessionState,
  id: string,
  artifacts: JobArtifacts,
): SessionState {
  return { ...state, artifacts: { ...state.artifacts, [id]: artifacts } };
}

// Steps one to three must be complete before a run can go out.
export function canSubmit(state: SessionState): boolean {
  if (!state.upload || !state.keyColumn || !state.taskColumn) return false;
  if (state.keyColumn === state.taskColumn) return false;
  return (
    state.upload.columns.includes(state.keyColumn) &&
    state.upload.columns.includes(state.taskColumn)
  );
}
