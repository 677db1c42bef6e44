// API origin resolution: ?api=... beats a stored choice beats the
// build-time default. The query value is persisted so deep links keep
// working after navigation.

export const DEFAULT_API_BASE = "http://127.0.0.1:8080";

const STORAGE_KEY = "neuron-api-base";

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export function resolveApiBase(search: string, storage: KeyValueStore, fallback: string = DEFAULT_API_BASE): string {
  const fromQuery = new URLSearchParams(search).get("api");
  if (fromQuery) {
    storage.setItem(STORAGE_KEY, fromQuery);
    return fromQuery.replace(/\/$/, "");
  }
  const stored = storage.getItem(STORAGE_KEY);
  return (stored ?? fallback).replace(/\/$/, "");
}
