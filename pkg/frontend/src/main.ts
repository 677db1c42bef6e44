// App wiring: stats header, review queue, and memory browser tabs.

import { ApiClient, ApiFailure, type RecordDetail } from "./api.js";
import { resolveApiBase } from "./config.js";
import {
  applySubmitOutcome,
  canSubmit,
  classifySubmitError,
  clearDraft,
  initialQueueState,
  loadDraft,
  saveDraft,
  selectItem,
  withItems,
  type Draft,
  type QueueState,
} from "./state.js";
import {
  clear,
  el,
  emptyState,
  renderQueueRow,
  renderRecordDetail,
  renderRecordRow,
  renderSearchHit,
  renderStats,
} from "./render.js";

const api = new ApiClient(resolveApiBase(window.location.search, window.localStorage));

const statsHost = document.getElementById("stats")!;
const queueListHost = document.getElementById("queue-list")!;
const queueDetailHost = document.getElementById("queue-detail")!;
const browserHost = document.getElementById("browser")!;
const noticeHost = document.getElementById("notice")!;

let queueState: QueueState = initialQueueState();

function currentDraft(recordId: string): Draft {
  return loadDraft(window.localStorage, recordId) ?? { reasoning: "", answer: "" };
}

async function refreshStats(): Promise<void> {
  try {
    const stats = await api.stats();
    clear(statsHost as HTMLElement);
    statsHost.append(renderStats(stats));
  } catch {
    statsHost.textContent = `service unreachable at ${api.base}`;
  }
}

async function refreshQueue(): Promise<void> {
  try {
    const page = await api.queue();
    queueState = withItems(queueState, page.items);
  } catch (err) {
    queueState = { ...queueState, retryBanner: `cannot load queue: ${String(err)}` };
  }
  renderQueue();
}

function renderNotices(): void {
  clear(noticeHost as HTMLElement);
  if (queueState.notice) noticeHost.append(el("div", { class: "notice success" }, queueState.notice));
  if (queueState.retryBanner) {
    const retry = el("button", { class: "link" }, "retry");
    retry.addEventListener("click", () => void refreshQueue());
    noticeHost.append(el("div", { class: "notice warning" }, queueState.retryBanner, " ", retry));
  }
}

function renderQueue(): void {
  renderNotices();
  const list = queueListHost as HTMLElement;
  clear(list);
  if (queueState.needsRefresh) {
    queueState = { ...queueState, needsRefresh: false };
    void refreshQueue();
    return;
  }
  if (queueState.items.length === 0) {
    list.append(emptyState("Review queue is empty — nothing is waiting on a human."));
    clear(queueDetailHost as HTMLElement);
    return;
  }
  const ul = el("ul", { class: "queue" });
  for (const item of queueState.items) {
    ul.append(
      renderQueueRow(item, item.id === queueState.selectedId, () => {
        queueState = selectItem(queueState, item.id);
        renderQueue();
      }),
    );
  }
  list.append(ul);
  renderQueueDetail();
}

function renderQueueDetail(): void {
  const host = queueDetailHost as HTMLElement;
  clear(host);
  const item = queueState.items.find((candidate) => candidate.id === queueState.selectedId);
  if (!item) {
    host.append(emptyState("Select a pending record to write its correction."));
    return;
  }
  const draft = currentDraft(item.id);

  const reasoningInput = el("textarea", { rows: "8", placeholder: "Correct step-by-step reasoning" }) as HTMLTextAreaElement;
  reasoningInput.value = draft.reasoning;
  const answerInput = el("input", { placeholder: "final answer" }) as HTMLInputElement;
  answerInput.value = draft.answer;
  const submit = el("button", { class: "primary" }, "Submit correction") as HTMLButtonElement;

  const syncDraft = () => {
    const next = { reasoning: reasoningInput.value, answer: answerInput.value };
    saveDraft(window.localStorage, item.id, next);
    submit.disabled = !canSubmit(next);
  };
  reasoningInput.addEventListener("input", syncDraft);
  answerInput.addEventListener("input", syncDraft);
  submit.disabled = !canSubmit(draft);

  submit.addEventListener("click", () => {
    void (async () => {
      submit.disabled = true;
      try {
        await api.submitCorrection(item.id, reasoningInput.value, answerInput.value);
        clearDraft(window.localStorage, item.id);
        queueState = applySubmitOutcome(queueState, item.id, {
          kind: "accepted",
          record: item,
        });
      } catch (err) {
        const outcome =
          err instanceof ApiFailure
            ? classifySubmitError(err.status, err.message)
            : classifySubmitError(null, String(err));
        queueState = applySubmitOutcome(queueState, item.id, outcome);
      }
      renderQueue();
      void refreshStats();
    })();
  });

  host.append(
    el("h3", {}, item.id),
    el("p", { class: "problem" }, item.problem),
    el("h4", {}, "wrong attempt"),
    el("pre", {}, item.response),
    el("div", { class: "kv" }, `extracted answer: ${item.answer || "(none)"} · gold answer: ${item.gold_answer ?? "(unknown)"}`),
    queueState.inlineError ? el("div", { class: "inline-error" }, queueState.inlineError) : "",
    el("label", {}, "corrected reasoning", reasoningInput),
    el("label", {}, "corrected answer", answerInput),
    submit,
  );
}

// ---------------------------------------------------------------- browser tab

function renderBrowser(): void {
  const host = browserHost as HTMLElement;
  clear(host);

  const searchInput = el("input", { placeholder: "similarity search over memory" }) as HTMLInputElement;
  const searchButton = el("button", {}, "Search") as HTMLButtonElement;
  const statusSelect = el("select", {}) as HTMLSelectElement;
  for (const status of ["", "correct", "corrected", "pending-review", "unverified", "rejected"]) {
    statusSelect.append(el("option", { value: status }, status || "all statuses"));
  }
  const results = el("div", { class: "browser-results" });
  const detail = el("div", { class: "browser-detail" });

  const openRecord = (id: string) => {
    void api.record(id).then((record) => {
      clear(detail);
      detail.append(renderRecordDetail(record));
    });
  };

  const showRecords = () => {
    void api.records(statusSelect.value || undefined).then((page) => {
      clear(results);
      if (page.items.length === 0) {
        results.append(emptyState("No records with this status."));
        return;
      }
      const table = el("table", { class: "records" });
      table.append(
        el("tr", {}, el("th", {}, "id"), el("th", {}, "status"), el("th", {}, "problem"), el("th", {}, "answer"), el("th", {}, "revisions")),
      );
      for (const record of page.items) table.append(renderRecordRow(record, openRecord));
      results.append(table);
    });
  };

  const runSearch = () => {
    const q = searchInput.value.trim();
    if (!q) return showRecords();
    void api.search(q, 10).then((page) => {
      clear(results);
      if (page.items.length === 0) {
        results.append(emptyState("No retrievable records match."));
        return;
      }
      const table = el("table", { class: "records" });
      table.append(el("tr", {}, el("th", {}, "rank"), el("th", {}, "score"), el("th", {}, "status"), el("th", {}, "problem")));
      for (const hit of page.items) table.append(renderSearchHit(hit, openRecord));
      results.append(table);
    });
  };

  searchButton.addEventListener("click", runSearch);
  searchInput.addEventListener("keydown", (event) => {
    if (event.key === "Enter") runSearch();
  });
  statusSelect.addEventListener("change", showRecords);

  host.append(el("div", { class: "browser-controls" }, searchInput, searchButton, statusSelect), results, detail);
  showRecords();
}

// ---------------------------------------------------------------- tabs

function activateTab(name: string): void {
  for (const section of document.querySelectorAll<HTMLElement>("[data-tab]")) {
    section.hidden = section.dataset.tab !== name;
  }
  for (const button of document.querySelectorAll<HTMLButtonElement>("nav button")) {
    button.classList.toggle("active", button.dataset.target === name);
  }
  if (name === "browser") renderBrowser();
}

for (const button of document.querySelectorAll<HTMLButtonElement>("nav button")) {
  button.addEventListener("click", () => activateTab(button.dataset.target!));
}

activateTab("queue");
void refreshStats();
void refreshQueue();
setInterval(() => void refreshStats(), 15_000);
