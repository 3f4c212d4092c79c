// Test environment: in-memory storage, recorded renders and navigation,
// and a scriptable fetch stub.

import { PortalApp, type AppEnv } from "../src/app.js";
import type { KeyValueStore } from "../src/session.js";
import type { ExamDetail, ExamSummary } from "../src/types.js";

export class MemoryStore implements KeyValueStore {
  private map = new Map<string, string>();
  getItem(key: string): string | null {
    return this.map.get(key) ?? null;
  }
  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }
  removeItem(key: string): void {
    this.map.delete(key);
  }
}

export interface RecordedRequest {
  url: string;
  init?: RequestInit;
}

export type StubHandler = (url: string, init?: RequestInit) => Response | null;

export function jsonResponse(doc: unknown, status = 200): Response {
  return new Response(JSON.stringify(doc), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export class Harness {
  storage = new MemoryStore();
  renders: string[] = [];
  requests: RecordedRequest[] = [];
  hash = "#/login";
  app: PortalApp;

  constructor(private handlers: StubHandler[]) {
    const env: AppEnv = {
      fetchImpl: async (url, init) => {
        this.requests.push({ url, init });
        for (const handler of this.handlers) {
          const response = handler(url, init);
          if (response !== null) return response;
        }
        throw new Error(`no stub for ${url}`);
      },
      storage: this.storage,
      getHash: () => this.hash,
      setHash: (hash) => {
        this.hash = hash;
      },
      render: (html) => {
        this.renders.push(html);
      },
    };
    this.app = new PortalApp(env);
  }

  get lastRender(): string {
    const html = this.renders[this.renders.length - 1];
    if (html === undefined) throw new Error("nothing rendered yet");
    return html;
  }

  async loginAs(user = "pat"): Promise<void> {
    this.handlers.unshift((url, init) =>
      url.endsWith("/api/sessions") && init?.method === "POST"
        ? jsonResponse({ token: `token-${user}`, expires_in: 3600 })
        : null,
    );
    await this.app.doLogin(user, "password123");
  }
}

export function examSummary(overrides: Partial<ExamSummary> = {}): ExamSummary {
  return {
    exam_id: "exam-1",
    submitted_at: 1_755_000_000,
    age: 64,
    gender: "female",
    verdict: "pd",
    verdict_probability: 0.734,
    model_version: "logreg-v1-abc",
    low_confidence: false,
    ...overrides,
  };
}

export function examDetail(overrides: Partial<ExamDetail> = {}): ExamDetail {
  return {
    ...examSummary(),
    per_image: [
      {
        position: 0,
        kind: "spiral",
        probability: 0.81,
        label: "pd",
        error: null,
        image_url: "/api/exams/exam-1/images/0",
      },
      {
        position: 1,
        kind: "spiral",
        probability: null,
        label: null,
        error: "empty trace",
        image_url: "/api/exams/exam-1/images/1",
      },
    ],
    ...overrides,
  };
}

export function pngUpload(name: string) {
  return {
    name,
    blob: new Blob([new Uint8Array([0x89, 0x50, 0x4e, 0x47])], { type: "image/png" }),
    kind: "spiral" as const,
  };
}
