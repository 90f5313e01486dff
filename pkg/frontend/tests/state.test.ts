import { describe, expect, test } from "vitest";

import { defaultDraft, validateDraft } from "../src/config.js";
import {
  canSubmit,
  dismissJob,
  freshState,
  type JobArtifacts,
  type JobCard,
  loadState,
  putArtifacts,
  saveState,
  setMapping,
  setUpload,
  type StringStore,
  upsertJob,
} from "../src/state.js";

function fakeStore(seed?: Record<string, string>): StringStore {
  const data = new Map(Object.entries(seed ?? {}));
  return {
    getItem: (key) => data.get(key) ?? null,
    setItem: (key, value) => void data.set(key, value),
  };
}

const UPLOAD = {
  token: "tok123",
  fileName: "query.csv",
  columns: ["product name", "year", "market value"],
  rowCount: 40,
  preview: [["acme1", "1995", "low"]],
};

function card(id: string, state = "queued"): JobCard {
  return {
    id,
    state,
    error: null,
    mode: "join_select_align",
    keyColumn: "product name",
    taskColumn: "market value",
    taskKind: "classification",
    submittedAt: "2026-01-01T00:00:00Z",
  };
}

describe("config draft", () => {
  test("defaults match the reference setup", () => {
    const draft = defaultDraft();
    expect(draft.k).toBe("60");
    expect(draft.m).toBe("600");
    expect(draft.tau).toBe("0.6");
    expect(draft.mode).toBe("join_select_align");
    expect(draft.folds).toBe("4");
  });

  test("a clean draft produces the full config", () => {
    const { errors, config } = validateDraft(defaultDraft());
    expect(errors).toEqual([]);
    expect(config).toEqual({
      mode: "join_select_align",
      model: "random_forest",
      strategy: "threshold",
      k: 60,
      m: 600,
      folds: 4,
      seed: 0,
      tau: 0.6,
    });
  });

  test.each([
    ["k", "0", "k must be at least 1"],
    ["m", "0", "m must be at least 1"],
    ["folds", "1", "folds must be at least 2"],
    ["k", "2.5", "k must be a whole number"],
    ["k", "", "k must be a whole number"],
    ["seed", "1.5", "seed must be a whole number"],
  ] as const)("rejects %s=%s like the server does", (key, value, want) => {
    const draft = { ...defaultDraft(), [key]: value };
    const { errors, config } = validateDraft(draft);
    expect(config).toBeNull();
    expect(errors).toContain(want);
  });

  test("rejects enum values outside the service's lists", () => {
    const draft = { ...defaultDraft(), mode: "telepathy" };
    const { errors } = validateDraft(draft);
    expect(errors).toEqual(["unknown mode telepathy"]);
  });

  test("negative seeds pass, the service accepts them at submit", () => {
    const { errors, config } = validateDraft({ ...defaultDraft(), seed: "-3" });
    expect(errors).toEqual([]);
    expect(config?.seed).toBe(-3);
  });

  test("tau is not range-checked, matching the service", () => {
    const { errors, config } = validateDraft({ ...defaultDraft(), tau: "9.5" });
    expect(errors).toEqual([]);
    expect(config?.tau).toBe(9.5);
  });

  test("tau is only sent for the threshold strategy", () => {
    const { config } = validateDraft({ ...defaultDraft(), strategy: "hard" });
    expect(config).not.toHaveProperty("tau");
    expect(config).not.toHaveProperty("cluster_count");
  });

  test("cluster count rides along only for soft aggregation", () => {
    const soft = { ...defaultDraft(), strategy: "soft", clusters: "7" };
    expect(validateDraft(soft).config?.cluster_count).toBe(7);
    const blank = { ...defaultDraft(), strategy: "soft", clusters: "" };
    expect(validateDraft(blank).config).not.toHaveProperty("cluster_count");
  });
});

describe("session persistence", () => {
  test("empty storage yields a fresh session", () => {
    const state = loadState(fakeStore());
    expect(state.upload).toBeNull();
    expect(state.jobs).toEqual([]);
    expect(state.draft).toEqual(defaultDraft());
  });

  test("garbage in storage falls back to fresh instead of throwing", () => {
    const store = fakeStore({ "tablelift-session-v1": "{not json" });
    expect(loadState(store).upload).toBeNull();
    const wrongShape = fakeStore({ "tablelift-session-v1": '{"jobs": 42}' });
    expect(loadState(wrongShape).jobs).toEqual([]);
  });

  test("a full session survives the round trip", () => {
    let state = setUpload(freshState(), UPLOAD);
    state = setMapping(state, "product name", "market value", "classification");
    state = { ...state, draft: { ...state.draft, k: "8" } };
    state = upsertJob(state, card("job1", "done"));
    const artifacts = { results: { improvement_pct: 12 } } as unknown as JobArtifacts;
    state = putArtifacts(state, "job1", artifacts);

    const store = fakeStore();
    saveState(store, state);
    const back = loadState(store);
    expect(back.upload?.token).toBe("tok123");
    expect(back.keyColumn).toBe("product name");
    expect(back.taskKind).toBe("classification");
    expect(back.draft.k).toBe("8");
    expect(back.jobs.map((j) => j.id)).toEqual(["job1"]);
    expect(back.jobs[0].state).toBe("done");
    expect(back.artifacts.job1).toBeTruthy();
  });

  test("artifacts for jobs no longer listed are dropped on load", () => {
    let state = upsertJob(freshState(), card("kept"));
    state = putArtifacts(state, "kept", {} as JobArtifacts);
    state = putArtifacts(state, "ghost", {} as JobArtifacts);
    const store = fakeStore();
    saveState(store, state);
    const back = loadState(store);
    expect(Object.keys(back.artifacts)).toEqual(["kept"]);
  });
});

describe("session mutators", () => {
  test("a new upload invalidates the old column picks", () => {
    let state = setUpload(freshState(), UPLOAD);
    state = setMapping(state, "product name", "market value", "regression");
    state = setUpload(state, { ...UPLOAD, token: "tok456" });
    expect(state.keyColumn).toBeNull();
    expect(state.taskColumn).toBeNull();
    expect(state.upload?.token).toBe("tok456");
  });

  test("upsert puts new jobs first and updates in place", () => {
    let state = upsertJob(freshState(), card("a"));
    state = upsertJob(state, card("b"));
    expect(state.jobs.map((j) => j.id)).toEqual(["b", "a"]);
    state = upsertJob(state, { ...card("a"), state: "done" });
    expect(state.jobs.map((j) => j.id)).toEqual(["b", "a"]);
    expect(state.jobs[1].state).toBe("done");
  });

  test("dismissing a job drops its card and its cached results", () => {
    let state = upsertJob(freshState(), card("a"));
    state = putArtifacts(state, "a", {} as JobArtifacts);
    state = dismissJob(state, "a");
    expect(state.jobs).toEqual([]);
    expect(state.artifacts).toEqual({});
  });

  test("submit stays gated until steps one to three are complete", () => {
    let state = freshState();
    expect(canSubmit(state)).toBe(false);
    state = setUpload(state, UPLOAD);
    expect(canSubmit(state)).toBe(false);
    state = setMapping(state, "product name", null, "regression");
    expect(canSubmit(state)).toBe(false);
    state = setMapping(state, "product name", "product name", "regression");
    expect(canSubmit(state)).toBe(false); // key and target must differ
    state = setMapping(state, "no such column", "market value", "regression");
    expect(canSubmit(state)).toBe(false);
    state = setMapping(state, "product name", "market value", "regression");
    expect(canSubmit(state)).toBe(true);
  });
});
