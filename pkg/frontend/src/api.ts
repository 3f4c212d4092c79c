// HTTP client for the assessment service. All state shown in the UI
// comes from these responses; nothing is computed client-side.

import type { ExamDetail, ExamSummary, SessionToken } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface ExamUpload {
  name: string;
  blob: Blob;
  kind: "spiral" | "meander";
}

export class ApiClient {
  constructor(
    private fetchImpl: FetchLike,
    private baseUrl: string = "",
    private token: string | null = null,
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private headers(json = false): Record<string, string> {
    const out: Record<string, string> = {};
    if (json) out["content-type"] = "application/json";
    if (this.token) out["authorization"] = `Bearer ${this.token}`;
    return out;
  }

  private async parse<T>(response: Response): Promise<T> {
    if (!response.ok) {
      let message = `request failed with status ${response.status}`;
      try {
        const doc = (await response.json()) as { error?: string };
        if (doc.error) message = doc.error;
      } catch {
        // body was not JSON; keep the generic message
      }
      throw new ApiError(response.status, message);
    }
    return (await response.json()) as T;
  }

  async register(login: string, password: string): Promise<void> {
    await this.parse(
      await this.fetchImpl(`${this.baseUrl}/api/users`, {
        method: "POST",
        headers: this.headers(true),
        body: JSON.stringify({ login, password }),
      }),
    );
  }

  async login(login: string, password: string): Promise<string> {
    const doc = await this.parse<SessionToken>(
      await this.fetchImpl(`${this.baseUrl}/api/sessions`, {
        method: "POST",
        headers: this.headers(true),
        body: JSON.stringify({ login, password }),
      }),
    );
    this.token = doc.token;
    return doc.token;
  }

  templateUrl(): string {
    return `${this.baseUrl}/api/template`;
  }

  async submitExam(uploads: ExamUpload[], age: string, gender: string): Promise<ExamDetail> {
    const form = new FormData();
    for (const upload of uploads) {
      form.append("images", upload.blob, upload.name);
    }
    form.append("age", age);
    form.append("gender", gender);
    form.append("kinds", uploads.map((u) => u.kind).join(","));
    return this.parse<ExamDetail>(
      await this.fetchImpl(`${this.baseUrl}/api/exams`, {
        method: "POST",
        headers: this.headers(),
        body: form,
      }),
    );
  }

  async listExams(): Promise<ExamSummary[]> {
    const doc = await this.parse<{ exams: ExamSummary[] }>(
      await this.fetchImpl(`${this.baseUrl}/api/exams`, { headers: this.headers() }),
    );
    // the service already orders newest first; keep that guarantee even
    // if a proxy or cache reorders
    return [...doc.exams].sort((a, b) => b.submitted_at - a.submitted_at);
  }

  async getExam(examId: string): Promise<ExamDetail> {
    return this.parse<ExamDetail>(
      await this.fetchImpl(`${this.baseUrl}/api/exams/${encodeURIComponent(examId)}`, {
        headers: this.headers(),
      }),
    );
  }
}
