// Run-parameter draft. The draft keeps raw input strings so a half-edited
// form survives a reload unchanged; parsing happens once, on submit.

export const MODES = [
  "no_enrich",
  "join",
  "join_align",
  "join_select",
  "join_select_align",
] as const;

export const MODELS = ["lasso_linear", "random_forest", "best_of_both"] as const;
export const STRATEGIES = ["hard", "threshold", "soft"] as const;
export const TASK_KINDS = ["regression", "classification"] as const;

export interface ConfigDraft {
  mode: string;
  k: string;
  m: string;
  strategy: string;
  tau: string;
  clusters: string;
  model: string;
  folds: string;
  seed: string;
}

export function defaultDraft(): ConfigDraft {
  return {
    mode: "join_select_align",
    k: "60",
    m: "600",
    strategy: "threshold",
    tau: "0.6",
    clusters: "",
    model: "random_forest",
    folds: "4",
    seed: "0",
  };
}

export interface DraftCheck {
  errors: string[];
  config: Record<string, unknown> | null;
}

function intField(
  raw: string,
  name: string,
  errors: string[],
  min?: number,
): number | null {
  const value = Number(raw);
  if (raw.trim() === "" || !Number.isInteger(value)) {
    errors.push(`${name} must be a whole number`);
    return null;
  }
  if (min !== undefined && value < min) {
    errors.push(`${name} must be at least ${min}`);
    return null;
  }
  return value;
}

// Mirrors the service's submit-time checks and nothing more: enum membership
// plus the k, m, folds bounds. The threshold and cluster count are accepted
// as-is because the service accepts any value for them at submit; a bad one
// surfaces as a failed job. Empty optional fields are omitted so the service
// defaults apply.
export function validateDraft(draft: ConfigDraft): DraftCheck {
  const errors: string[] = [];
  if (!(MODES as readonly string[]).includes(draft.mode)) {
    errors.push(`unknown mode ${draft.mode}`);
  }
  if (!(MODELS as readonly string[]).includes(draft.model)) {
    errors.push(`unknown model ${draft.model}`);
  }
  if (!(STRATEGIES as readonly string[]).includes(draft.strategy)) {
    errors.push(`unknown strategy ${draft.strategy}`);
  }
  const k = intField(draft.k, "k", errors, 1);
  const m = intField(draft.m, "m", errors, 1);
  const folds = intField(draft.folds, "folds", errors, 2);
  const seed = intField(draft.seed, "seed", errors);
  if (errors.length > 0) return { errors, config: null };

  const config: Record<string, unknown> = {
    mode: draft.mode,
    model: draft.model,
    strategy: draft.strategy,
    k,
    m,
    folds,
    seed,
  };
  const tau = Number(draft.tau);
  if (draft.strategy === "threshold" && draft.tau.trim() !== "" && Number.isFinite(tau)) {
    config.tau = tau;
  }
  const clusters = Number(draft.clusters);
  if (draft.strategy === "soft" && draft.clusters.trim() !== "" && Number.isFinite(clusters)) {
    config.cluster_count = clusters;
  }
  return { errors: [], config };
}
