export function fmt(x: number, digits = 4): string {
  if (!Number.isFinite(x)) return String(x);
  const a = Math.abs(x);
  if (a !== 0 && (a >= 1e6 || a < 1e-4)) return x.toExponential(2);
  return String(Number(x.toFixed(digits)));
}

export function fmtSeconds(x: number | null): string {
  if (x === null) return "skipped";
  return `${fmt(x, 3)}s`;
}

export function fmtPct(x: number): string {
  const sign = x > 0 ? "+" : "";
  return `${sign}${fmt(x, 2)}%`;
}
