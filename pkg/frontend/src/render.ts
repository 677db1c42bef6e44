// Small DOM builders. All data lands in text nodes, never innerHTML.

import type { RecordDetail, RecordSummary, Revision, SearchHit, Stats } from "./api.js";
import { formatScore } from "./state.js";

type Child = Node | string | null | undefined;

export function el(tag: string, attrs: Record<string, string> = {}, ...children: Child[]): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    if (child == null) continue;
    node.append(typeof child === "string" ? document.createTextNode(child) : child);
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function statusBadge(status: string): HTMLElement {
  return el("span", { class: `badge badge-${status}` }, status);
}

export function renderStats(stats: Stats): HTMLElement {
  const order = ["correct", "corrected", "pending-review", "unverified", "rejected"];
  const parts = order.map((status) => el("span", { class: "stat" }, `${status}: ${stats.counts[status] ?? 0}`));
  const root = el(
    "div",
    { class: "stats-row" },
    el("span", { class: "stat stat-strong" }, `${stats.size} records`),
    el("span", { class: "stat" }, `dim ${stats.dim}`),
    ...parts,
  );
  if (stats.last_eval && stats.last_eval.augmented_accuracy !== undefined) {
    root.append(
      el(
        "span",
        { class: "stat" },
        `last eval: ${stats.last_eval.baseline_accuracy?.toFixed(3)} → ${stats.last_eval.augmented_accuracy.toFixed(3)}`,
      ),
    );
  }
  return root;
}

export function renderQueueRow(item: RecordDetail, selected: boolean, onOpen: () => void): HTMLElement {
  const row = el(
    "li",
    { class: selected ? "queue-row selected" : "queue-row" },
    el("div", { class: "queue-problem" }, item.problem),
    el(
      "div",
      { class: "queue-meta" },
      `attempt answer: ${item.answer || "(none)"} · gold: ${item.gold_answer ?? "?"} · ${item.created_at}`,
    ),
  );
  row.addEventListener("click", onOpen);
  return row;
}

export function renderRevision(revision: Revision, index: number): HTMLElement {
  return el(
    "div",
    { class: "revision" },
    el("div", { class: "revision-head" }, `revision ${index + 1} · ${revision.provenance} · ${revision.timestamp}`),
    el("pre", {}, revision.response),
  );
}

export function renderSearchHit(hit: SearchHit, onOpen: (id: string) => void): HTMLElement {
  const row = el(
    "tr",
    {},
    el("td", {}, String(hit.rank)),
    el("td", { class: "mono" }, formatScore(hit.score)),
    el("td", {}, statusBadge(hit.status)),
    el("td", { class: "grow" }, hit.problem),
  );
  row.addEventListener("click", () => onOpen(hit.record_id));
  return row;
}

export function renderRecordRow(record: RecordSummary, onOpen: (id: string) => void): HTMLElement {
  const row = el(
    "tr",
    {},
    el("td", { class: "mono" }, record.id),
    el("td", {}, statusBadge(record.status)),
    el("td", { class: "grow" }, record.problem),
    el("td", {}, record.answer || ""),
    el("td", {}, String(record.revision_count)),
  );
  row.addEventListener("click", () => onOpen(record.id));
  return row;
}

export function renderRecordDetail(record: RecordDetail): HTMLElement {
  const root = el(
    "div",
    { class: "record-detail" },
    el("h3", {}, record.id, " ", statusBadge(record.status)),
    el("p", { class: "problem" }, record.problem),
    el("div", { class: "kv" }, `answer: ${record.answer || "(none)"} · gold: ${record.gold_answer ?? "(none)"} · ${record.provenance}`),
    el("h4", {}, "reasoning"),
    el("pre", {}, record.reasoning || "(empty)"),
  );
  if (record.revisions.length > 0) {
    root.append(el("h4", {}, `revision history (${record.revisions.length})`));
    record.revisions.forEach((revision, index) => root.append(renderRevision(revision, index)));
  }
  return root;
}

export function emptyState(message: string): HTMLElement {
  return el("div", { class: "empty-state" }, message);
}
