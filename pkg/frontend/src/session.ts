// Bearer-token persistence. Storage is injectable so tests run without a
// browser; the app passes window.sessionStorage.

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const TOKEN_KEY = "micrographia-portal-token";

export function saveToken(store: KeyValueStore, token: string): void {
  store.setItem(TOKEN_KEY, token);
}

export function loadToken(store: KeyValueStore): string | null {
  return store.getItem(TOKEN_KEY);
}

export function clearToken(store: KeyValueStore): void {
  store.removeItem(TOKEN_KEY);
}
