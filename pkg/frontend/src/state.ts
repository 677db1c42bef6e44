// Pure view-state logic for the review queue: draft handling, submit
// gating, and how each submit outcome changes the screen. Kept free of
// DOM and network so it can be tested directly and reused by the e2e
// driver.

import type { RecordDetail } from "./api.js";
import type { KeyValueStore } from "./config.js";

export interface Draft {
  reasoning: string;
  answer: string;
}

const NUMBER_PATTERN = /^-?(\d+(\.\d+)?|\.\d+)([eE][+-]?\d+)?$/;

/** Whether the service will accept this answer as a number (local
 * pre-check only; the server remains authoritative). */
export function canonicalizesAsNumber(raw: string): boolean {
  const cleaned = raw.trim().replace(/[$,%]/g, "").replace(/,/g, "").trim();
  return NUMBER_PATTERN.test(cleaned);
}

export function canSubmit(draft: Draft): boolean {
  return draft.reasoning.trim().length > 0 && canonicalizesAsNumber(draft.answer);
}

/** Similarity scores always render with four decimals. */
export function formatScore(score: number): string {
  return score.toFixed(4);
}

// ---------------------------------------------------------------- drafts

const DRAFT_PREFIX = "neuron-draft-";

export function draftKey(recordId: string): string {
  return `${DRAFT_PREFIX}${recordId}`;
}

export function saveDraft(storage: KeyValueStore, recordId: string, draft: Draft): void {
  storage.setItem(draftKey(recordId), JSON.stringify(draft));
}

export function loadDraft(storage: KeyValueStore, recordId: string): Draft | null {
  const raw = storage.getItem(draftKey(recordId));
  if (!raw) return null;
  try {
    const parsed = JSON.parse(raw) as Partial<Draft>;
    return { reasoning: parsed.reasoning ?? "", answer: parsed.answer ?? "" };
  } catch {
    return null;
  }
}

export interface Removable extends KeyValueStore {
  removeItem(key: string): void;
}

export function clearDraft(storage: Removable, recordId: string): void {
  storage.removeItem(draftKey(recordId));
}

// ---------------------------------------------------------------- submit outcomes

export type SubmitOutcome =
  | { kind: "accepted"; record: RecordDetail }
  | { kind: "rejected"; message: string } // 422: wrong or unusable answer
  | { kind: "conflict" } // 409: another reviewer got there first
  | { kind: "failed"; message: string }; // network or server trouble

export function classifySubmitError(status: number | null, message: string): SubmitOutcome {
  if (status === 422) return { kind: "rejected", message };
  if (status === 409) return { kind: "conflict" };
  return { kind: "failed", message };
}

export interface QueueState {
  items: RecordDetail[];
  selectedId: string | null;
  /** 422 feedback for the selected item; drafts stay untouched. */
  inlineError: string | null;
  /** Network-failure banner; submit can be retried with the same drafts. */
  retryBanner: string | null;
  notice: string | null;
  /** Set on 409: the list is stale and must be reloaded. */
  needsRefresh: boolean;
}

export function initialQueueState(): QueueState {
  return {
    items: [],
    selectedId: null,
    inlineError: null,
    retryBanner: null,
    notice: null,
    needsRefresh: false,
  };
}

export function withItems(state: QueueState, items: RecordDetail[]): QueueState {
  const selectedId = items.some((item) => item.id === state.selectedId) ? state.selectedId : null;
  return { ...state, items, selectedId, needsRefresh: false };
}

export function selectItem(state: QueueState, recordId: string | null): QueueState {
  return { ...state, selectedId: recordId, inlineError: null, notice: null };
}

export function applySubmitOutcome(state: QueueState, recordId: string, outcome: SubmitOutcome): QueueState {
  switch (outcome.kind) {
    case "accepted":
      return {
        ...state,
        items: state.items.filter((item) => item.id !== recordId),
        selectedId: null,
        inlineError: null,
        retryBanner: null,
        notice: `Correction accepted; ${recordId} is now retrievable.`,
      };
    case "rejected":
      return { ...state, inlineError: outcome.message, retryBanner: null, notice: null };
    case "conflict":
      return { ...state, inlineError: null, retryBanner: null, notice: null, needsRefresh: true };
    case "failed":
      return { ...state, retryBanner: outcome.message, notice: null };
  }
}
