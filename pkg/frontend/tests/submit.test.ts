// Submit-a-test flow against the stubbed API.

import { describe, expect, it } from "vitest";

import { Harness, examDetail, jsonResponse, pngUpload } from "./helpers.js";

describe("submit flow", () => {
  it("renders the returned probability to one decimal", async () => {
    const detail = examDetail({ verdict_probability: 0.6173 });
    const h = new Harness([
      (url, init) =>
        url.endsWith("/api/exams") && init?.method === "POST" ? jsonResponse(detail) : null,
    ]);
    await h.loginAs();
    h.app.setUploads([pngUpload("a.png"), pngUpload("b.png")]);
    await h.app.doSubmitExam("64", "female");

    const html = h.lastRender;
    expect(html).toContain('data-role="result"');
    expect(html).toContain("61.7% chance of having PD");
    expect(html).not.toContain("61.73");
    expect(html).toContain("Signs consistent with PD");
    // the per-image breakdown shows the failed image with its reason
    expect(html).toContain("empty trace");
    expect(html).toContain("excluded");
  });

  it("sends multipart form data with demographics and bearer token", async () => {
    const h = new Harness([
      (url, init) =>
        url.endsWith("/api/exams") && init?.method === "POST"
          ? jsonResponse(examDetail())
          : null,
    ]);
    await h.loginAs("uploader");
    h.app.setUploads([pngUpload("one.png")]);
    await h.app.doSubmitExam("59", "male");

    const submit = h.requests.find((r) => r.url.endsWith("/api/exams"));
    expect(submit).toBeDefined();
    const body = submit!.init?.body as FormData;
    expect(body).toBeInstanceOf(FormData);
    expect(body.getAll("images")).toHaveLength(1);
    expect(body.get("age")).toBe("59");
    expect(body.get("gender")).toBe("male");
    const headers = submit!.init?.headers as Record<string, string>;
    expect(headers.authorization).toBe("Bearer token-uploader");
  });

  it("blocks submission with inline errors and sends no request", async () => {
    const h = new Harness([]);
    await h.loginAs();
    const requestsAfterLogin = h.requests.length;
    await h.app.doSubmitExam("", "");
    const html = h.lastRender;
    expect(html).toContain('data-error-for="age"');
    expect(html).toContain('data-error-for="gender"');
    expect(html).toContain('data-error-for="images"');
    expect(h.requests.length).toBe(requestsAfterLogin);
  });

  it("renders an actionable retry message when every image is unusable", async () => {
    const h = new Harness([
      (url, init) =>
        url.endsWith("/api/exams") && init?.method === "POST"
          ? jsonResponse({ error: "every image failed trace extraction" }, 422)
          : null,
    ]);
    await h.loginAs();
    h.app.setUploads([pngUpload("blank.png")]);
    await h.app.doSubmitExam("70", "male");
    const html = h.lastRender;
    expect(html).toContain('data-role="submit-error"');
    expect(html).toContain("every image failed trace extraction");
    expect(html).toContain("retry");
  });

  it("marks a low-confidence result when under six usable images", async () => {
    const h = new Harness([
      (url, init) =>
        url.endsWith("/api/exams") && init?.method === "POST"
          ? jsonResponse(examDetail({ low_confidence: true }))
          : null,
    ]);
    await h.loginAs();
    h.app.setUploads([pngUpload("a.png")]);
    await h.app.doSubmitExam("64", "female");
    expect(h.lastRender).toContain('data-role="low-confidence"');
  });

  it("links the printable template on the submit page", async () => {
    const h = new Harness([]);
    await h.loginAs();
    h.hash = "#/submit";
    await h.app.show();
    expect(h.lastRender).toContain('data-role="template-link"');
    expect(h.lastRender).toContain("/api/template");
  });
});
