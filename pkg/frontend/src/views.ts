// Pure page renderers: application state in, HTML string out. Keeping
// them DOM-free lets the flows run under plain node in tests; app.ts
// owns mounting and event wiring.

import type { ExamDetail, ExamSummary } from "./types.js";
import { escapeHtml, examDate, pdChancePercent } from "./format.js";

export interface SubmitState {
  fileNames: string[];
  error: string | null;
  fieldErrors: Partial<Record<"age" | "gender" | "images", string>>;
  submitting: boolean;
  result: ExamDetail | null;
}

export const emptySubmitState: SubmitState = {
  fileNames: [],
  error: null,
  fieldErrors: {},
  submitting: false,
  result: null,
};

function navBar(active: "submit" | "history"): string {
  const link = (page: string, label: string, isActive: boolean) =>
    `<a href="#/${page}" class="nav-link${isActive ? " active" : ""}">${label}</a>`;
  return `<nav class="topnav">
    ${link("submit", "Submit A Test", active === "submit")}
    ${link("history", "Exam History", active === "history")}
    <a href="#/login" class="nav-link logout" data-action="logout">Log out</a>
  </nav>`;
}

export function renderLogin(error: string | null = null, notice: string | null = null): string {
  return `<main class="card narrow">
    <h1>Assessment Portal</h1>
    <p>Log in to submit a handwriting test or review your exam history.</p>
    ${notice ? `<p class="notice">${escapeHtml(notice)}</p>` : ""}
    ${error ? `<p class="error" data-role="login-error">${escapeHtml(error)}</p>` : ""}
    <form data-form="login">
      <label>Login <input name="login" autocomplete="username" required /></label>
      <label>Password <input name="password" type="password" autocomplete="current-password" required /></label>
      <div class="row">
        <button type="submit" data-action="login">Log in</button>
        <button type="button" data-action="register">Create account</button>
      </div>
    </form>
  </main>`;
}

function fieldError(state: SubmitState, field: "age" | "gender" | "images"): string {
  const message = state.fieldErrors[field];
  return message ? `<span class="field-error" data-error-for="${field}">${escapeHtml(message)}</span>` : "";
}

export function renderSubmit(state: SubmitState, templateUrl: string): string {
  const files = state.fileNames.length
    ? `<ul class="previews">${state.fileNames
        .map((name) => `<li>${escapeHtml(name)}</li>`)
        .join("")}</ul>`
    : `<p class="hint">No images selected yet.</p>`;
  return `${navBar("submit")}
  <main class="card">
    <h1>Submit A Test</h1>
    <ol class="steps">
      <li><a href="${templateUrl}" download="assessment.png" data-role="template-link">Print the handwriting assessment</a></li>
      <li>Trace every guide figure with a pen, then photograph or scan the page.</li>
      <li>Upload between 1 and 8 drawing photos below (6 or more gives a confident result).</li>
    </ol>
    ${state.error ? `<p class="error" data-role="submit-error">${escapeHtml(state.error)}</p>` : ""}
    <form data-form="exam" novalidate>
      <label>Drawing photos
        <input type="file" name="images" accept="image/png,image/jpeg" multiple />
        ${fieldError(state, "images")}
      </label>
      ${files}
      <label>Age <input name="age" inputmode="numeric" />${fieldError(state, "age")}</label>
      <label>Gender
        <select name="gender">
          <option value="">choose</option>
          <option value="male">male</option>
          <option value="female">female</option>
        </select>
        ${fieldError(state, "gender")}
      </label>
      <button type="submit" data-action="submit-exam" ${state.submitting ? "disabled" : ""}>
        ${state.submitting ? "Scoring..." : "Submit for assessment"}
      </button>
    </form>
    ${state.result ? renderResultPanel(state.result) : ""}
  </main>`;
}

export function renderResultPanel(result: ExamDetail): string {
  const rows = result.per_image
    .map((img) => {
      const outcome =
        img.error !== null
          ? `<span class="img-error">${escapeHtml(img.error)} (excluded)</span>`
          : `${pdChancePercent(img.probability ?? 0)} &middot; ${img.label}`;
      return `<li>#${img.position + 1} ${escapeHtml(img.kind)}: ${outcome}</li>`;
    })
    .join("");
  return `<section class="result" data-role="result">
    <h2>Result</h2>
    <p class="verdict ${result.verdict}" data-role="verdict">
      ${result.verdict === "pd" ? "Signs consistent with PD" : "No PD signs detected"}
    </p>
    <p data-role="pd-chance">${pdChancePercent(result.verdict_probability)} chance of having PD</p>
    ${result.low_confidence ? `<p class="notice" data-role="low-confidence">Fewer than 6 usable images; consider retaking with more drawings.</p>` : ""}
    <ul class="per-image">${rows}</ul>
    <p><a href="#/exams/${encodeURIComponent(result.exam_id)}">Saved to your exam history</a></p>
  </section>`;
}

export function renderHistory(exams: ExamSummary[]): string {
  if (exams.length === 0) {
    return `${navBar("history")}
    <main class="card">
      <h1>Exam History</h1>
      <p class="hint" data-role="empty-history">No exams yet. Submit your first test to see it here.</p>
    </main>`;
  }
  const rows = exams
    .map(
      (exam, i) => `<tr data-exam-row="${escapeHtml(exam.exam_id)}">
        <td>${exams.length - i}</td>
        <td>${examDate(exam.submitted_at)}</td>
        <td>${exam.age}</td>
        <td>${escapeHtml(exam.gender)}</td>
        <td class="verdict ${exam.verdict}">${exam.verdict}</td>
        <td>${pdChancePercent(exam.verdict_probability)}</td>
        <td><a href="#/exams/${encodeURIComponent(exam.exam_id)}" data-role="exam-icon" title="open exam">&#128196;</a></td>
      </tr>`,
    )
    .join("");
  return `${navBar("history")}
  <main class="card">
    <h1>Exam History</h1>
    <table class="history">
      <thead><tr><th>#</th><th>Date</th><th>Age</th><th>Gender</th><th>Verdict</th><th>% chance of PD</th><th></th></tr></thead>
      <tbody>${rows}</tbody>
    </table>
  </main>`;
}

export function renderExamDetail(exam: ExamDetail): string {
  const images = exam.per_image
    .map(
      (img) => `<figure>
        <img src="${img.image_url}" alt="drawing ${img.position + 1}" loading="lazy" />
        <figcaption>#${img.position + 1} ${escapeHtml(img.kind)} &middot; ${
          img.error !== null
            ? `<span class="img-error">${escapeHtml(img.error)}</span>`
            : `${pdChancePercent(img.probability ?? 0)} (${img.label})`
        }</figcaption>
      </figure>`,
    )
    .join("");
  return `${navBar("history")}
  <main class="card">
    <h1>Exam ${examDate(exam.submitted_at)}</h1>
    <p data-role="pd-chance">${pdChancePercent(exam.verdict_probability)} chance of having PD
      &middot; verdict <strong class="verdict ${exam.verdict}">${exam.verdict}</strong></p>
    <p>Age ${exam.age} &middot; ${escapeHtml(exam.gender)} &middot; model ${escapeHtml(exam.model_version)}</p>
    <div class="gallery">${images}</div>
    <p><a href="#/history">Back to history</a></p>
  </main>`;
}

export function renderNotFound(message: string): string {
  return `${navBar("history")}
  <main class="card">
    <h1>Not found</h1>
    <p class="error" data-role="not-found">${escapeHtml(message)}</p>
    <p><a href="#/history">Back to history</a></p>
  </main>`;
}
