// Presentation helpers shared by views and tests.

export function pdChancePercent(probability: number): string {
  return `${(probability * 100).toFixed(1)}%`;
}

export function examDate(epochSeconds: number): string {
  const d = new Date(epochSeconds * 1000);
  const pad = (v: number) => String(v).padStart(2, "0");
  return `${d.getFullYear()}-${pad(d.getMonth() + 1)}-${pad(d.getDate())} ${pad(d.getHours())}:${pad(d.getMinutes())}`;
}

export function escapeHtml(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}
