// Typed client for the enrichment service. Paths are same-origin absolute so
// the app works wherever the API happens to be mounted.

export interface UploadResponse {
  token: string;
  columns: string[];
  row_count: number;
  preview: string[][];
}

export interface JobSnapshot {
  id: string;
  state: string;
  error: string | null;
  created_at: string;
  updated_at: string;
  config: Record<string, unknown>;
  submit: {
    table_token: string;
    key_column: string;
    task_column: string;
    task_kind: string;
  };
  result_available: boolean;
  result_url: string | null;
}

export interface EvalReport {
  task_kind: string;
  metric: string;
  fold_scores: number[];
  mean: number;
  std: number;
  wall_time_seconds: number;
}

export interface ImportanceEntry {
  name: string;
  importance: number;
  origin: "query" | "enriched";
}

export interface ResultsPayload {
  config: Record<string, unknown>;
  stage_seconds: Record<string, number | null>;
  before: EvalReport;
  after: EvalReport;
  improvement_pct: number;
  importance: { features: ImportanceEntry[] };
  candidate_counts: Record<string, number>;
  tables_used: string[];
  model_kind_used: string;
}

export interface ProvenanceEntry {
  table_id: string;
  title: string;
  context: string;
  source_url: string | null;
  score: number;
  columns: string[];
}

export type DiffFlag = "fixed" | "broken" | "both-wrong-changed";

export interface DiffEntry {
  row: number;
  before: string;
  after: string;
  truth: string;
  flag: DiffFlag;
}

export type DiffsPayload =
  | { supported: false; reason: string }
  | {
      supported: true;
      filter: string;
      counts: Record<DiffFlag, number>;
      diffs: DiffEntry[];
    };

export interface JobRequest {
  table_token: string;
  key_column: string;
  task_column: string;
  task_kind: string;
  config: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = "ApiError";
  }
}

async function asJson<T>(res: Response): Promise<T> {
  if (!res.ok) {
    let detail = `${res.status} ${res.statusText}`;
    try {
      const body = await res.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body, keep the status line
    }
    throw new ApiError(detail, res.status);
  }
  return (await res.json()) as T;
}

// Blob.text() is missing from some DOM implementations; FileReader is
// everywhere.
function readFileText(file: File): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => resolve(String(reader.result));
    reader.onerror = () =>
      reject(reader.error ?? new Error("could not read the file"));
    reader.readAsText(file);
  });
}

// The multipart body is assembled by hand: FormData implementations differ
// between browsers and test DOMs, and the server only takes UTF-8 CSV anyway.
export async function uploadTable(file: File): Promise<UploadResponse> {
  const text = await readFileText(file);
  const boundary = "----tablelift" + Math.random().toString(16).slice(2);
  const name = file.name.replace(/["\r\n]/g, "_");
  const body = [
    `--${boundary}`,
    `Content-Disposition: form-data; name="file"; filename="${name}"`,
    "Content-Type: text/csv",
    "",
    text,
    `--${boundary}--`,
    "",
  ].join("\r\n");
  const res = await fetch("/api/tables", {
    method: "POST",
    headers: { "Content-Type": `multipart/form-data; boundary=${boundary}` },
    body,
  });
  return asJson<UploadResponse>(res);
}

export async function submitJob(req: JobRequest): Promise<string> {
  const res = await fetch("/api/jobs", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(req),
  });
  const data = await asJson<{ job_id: string }>(res);
  return data.job_id;
}

export async function getJob(id: string): Promise<JobSnapshot> {
  return asJson(await fetch(`/api/jobs/${id}`));
}

export async function getResults(id: string): Promise<ResultsPayload> {
  return asJson(await fetch(`/api/jobs/${id}/results`));
}

export async function getProvenance(id: string): Promise<ProvenanceEntry[]> {
  return asJson(await fetch(`/api/jobs/${id}/provenance`));
}

export async function getDiffs(
  id: string,
  filter: string,
): Promise<DiffsPayload> {
  const query = encodeURIComponent(filter);
  return asJson(await fetch(`/api/jobs/${id}/diffs?filter=${query}`));
}

export function enrichedCsvUrl(id: string): string {
  return `/api/jobs/${id}/enriched.csv`;
}
