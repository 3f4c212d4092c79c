// Portal controller: routes, actions, and error handling. The
// environment (fetch, storage, hash access, renderer) is injected so the
// whole flow runs under node in tests; main.ts supplies the browser one.

import { ApiClient, ApiError, type ExamUpload, type FetchLike } from "./api.js";
import { clearToken, loadToken, saveToken, type KeyValueStore } from "./session.js";
import { parseRoute, type Route } from "./router.js";
import {
  emptySubmitState,
  renderExamDetail,
  renderHistory,
  renderLogin,
  renderNotFound,
  renderSubmit,
  type SubmitState,
} from "./views.js";

export interface AppEnv {
  fetchImpl: FetchLike;
  storage: KeyValueStore;
  getHash(): string;
  setHash(hash: string): void;
  render(html: string): void;
  baseUrl?: string;
}

export class PortalApp {
  readonly api: ApiClient;
  submitState: SubmitState = { ...emptySubmitState };
  pendingUploads: ExamUpload[] = [];
  loginError: string | null = null;
  loginNotice: string | null = null;

  constructor(private env: AppEnv) {
    this.api = new ApiClient(env.fetchImpl, env.baseUrl ?? "", loadToken(env.storage));
  }

  get authenticated(): boolean {
    return loadToken(this.env.storage) !== null;
  }

  /** Route 401s to the login page; rethrow everything else. */
  private handleAuthFailure(error: unknown): string | null {
    if (error instanceof ApiError && error.status === 401) {
      clearToken(this.env.storage);
      this.api.setToken(null);
      this.loginError = "Session expired; please log in again.";
      this.env.setHash("#/login");
      return null;
    }
    if (error instanceof ApiError) return error.message;
    throw error;
  }

  async show(): Promise<void> {
    await this.showRoute(parseRoute(this.env.getHash()));
  }

  async showRoute(route: Route): Promise<void> {
    if (route.page !== "login" && !this.authenticated) {
      this.env.setHash("#/login");
      this.env.render(renderLogin(this.loginError, this.loginNotice));
      return;
    }
    switch (route.page) {
      case "login":
        this.env.render(renderLogin(this.loginError, this.loginNotice));
        return;
      case "submit":
        this.env.render(renderSubmit(this.submitState, this.api.templateUrl()));
        return;
      case "history": {
        try {
          const exams = await this.api.listExams();
          this.env.render(renderHistory(exams));
        } catch (error) {
          const message = this.handleAuthFailure(error);
          if (message !== null) this.env.render(renderNotFound(message));
          else this.env.render(renderLogin(this.loginError, this.loginNotice));
        }
        return;
      }
      case "exam": {
        try {
          const exam = await this.api.getExam(route.examId);
          this.env.render(renderExamDetail(exam));
        } catch (error) {
          if (error instanceof ApiError && (error.status === 404 || error.status === 403)) {
            this.env.render(renderNotFound(`Exam ${route.examId} is not available.`));
            return;
          }
          const message = this.handleAuthFailure(error);
          if (message !== null) this.env.render(renderNotFound(message));
          else this.env.render(renderLogin(this.loginError, this.loginNotice));
        }
        return;
      }
    }
  }

  async doLogin(login: string, password: string): Promise<void> {
    try {
      const token = await this.api.login(login, password);
      saveToken(this.env.storage, token);
      this.loginError = null;
      this.loginNotice = null;
      this.env.setHash("#/submit");
      await this.show();
    } catch (error) {
      if (error instanceof ApiError) {
        this.loginError = error.message;
        this.env.render(renderLogin(this.loginError, this.loginNotice));
        return;
      }
      throw error;
    }
  }

  async doRegister(login: string, password: string): Promise<void> {
    try {
      await this.api.register(login, password);
      this.loginNotice = "Account created; log in to continue.";
      this.loginError = null;
    } catch (error) {
      if (!(error instanceof ApiError)) throw error;
      this.loginError = error.message;
    }
    this.env.render(renderLogin(this.loginError, this.loginNotice));
  }

  doLogout(): void {
    clearToken(this.env.storage);
    this.api.setToken(null);
    this.loginNotice = "Logged out.";
    this.loginError = null;
    this.env.setHash("#/login");
  }

  setUploads(uploads: ExamUpload[]): void {
    this.pendingUploads = uploads;
    this.submitState = {
      ...this.submitState,
      fileNames: uploads.map((u) => u.name),
      fieldErrors: { ...this.submitState.fieldErrors, images: undefined },
    };
  }

  /** Client-side validation mirroring the service's rules; no request is
   * sent while anything is invalid. */
  validateSubmission(age: string, gender: string): boolean {
    const fieldErrors: SubmitState["fieldErrors"] = {};
    if (this.pendingUploads.length === 0) fieldErrors.images = "Select at least one drawing photo.";
    if (this.pendingUploads.length > 8) fieldErrors.images = "At most 8 images per exam.";
    const ageValue = Number(age);
    if (!age.trim() || !Number.isFinite(ageValue) || ageValue <= 0 || ageValue >= 130) {
      fieldErrors.age = "Enter an age in years.";
    }
    if (gender !== "male" && gender !== "female") {
      fieldErrors.gender = "Choose a gender.";
    }
    this.submitState = { ...this.submitState, fieldErrors, error: null };
    return Object.values(fieldErrors).every((v) => v === undefined);
  }

  async doSubmitExam(age: string, gender: string): Promise<void> {
    if (!this.validateSubmission(age, gender)) {
      this.env.render(renderSubmit(this.submitState, this.api.templateUrl()));
      return;
    }
    this.submitState = { ...this.submitState, submitting: true, error: null, result: null };
    this.env.render(renderSubmit(this.submitState, this.api.templateUrl()));
    try {
      const result = await this.api.submitExam(this.pendingUploads, age.trim(), gender);
      this.submitState = { ...this.submitState, submitting: false, result };
    } catch (error) {
      const message = this.handleAuthFailure(error);
      if (message === null) {
        this.env.render(renderLogin(this.loginError, this.loginNotice));
        return;
      }
      const actionable =
        error instanceof ApiError && error.status === 422
          ? `${message} — check that the photos show the traced figures clearly, then retry.`
          : message;
      this.submitState = { ...this.submitState, submitting: false, error: actionable };
    }
    this.env.render(renderSubmit(this.submitState, this.api.templateUrl()));
  }
}
