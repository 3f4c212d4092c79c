// Browser bootstrap: real DOM wiring around the PortalApp controller.

import { PortalApp } from "./app.js";
import type { ExamUpload } from "./api.js";

const MAX_UPLOAD_BYTES = 8 * 1024 * 1024;
const MAX_SIDE = 1600;

/** Downscale oversized photos on the client so uploads stay under the
 * service's cap; anything already small passes through untouched. */
async function prepareUpload(file: File): Promise<ExamUpload> {
  const base = { name: file.name, kind: "spiral" as const };
  if (file.size <= MAX_UPLOAD_BYTES && typeof createImageBitmap !== "function") {
    return { ...base, blob: file };
  }
  try {
    const bitmap = await createImageBitmap(file);
    const scale = Math.min(1, MAX_SIDE / Math.max(bitmap.width, bitmap.height));
    if (scale === 1 && file.size <= MAX_UPLOAD_BYTES) return { ...base, blob: file };
    const canvas = document.createElement("canvas");
    canvas.width = Math.round(bitmap.width * scale);
    canvas.height = Math.round(bitmap.height * scale);
    canvas.getContext("2d")!.drawImage(bitmap, 0, 0, canvas.width, canvas.height);
    const blob = await new Promise<Blob | null>((resolve) =>
      canvas.toBlob(resolve, "image/png"),
    );
    return { ...base, blob: blob ?? file };
  } catch {
    return { ...base, blob: file };
  }
}

function start(): void {
  const mount = document.getElementById("app");
  if (!mount) throw new Error("missing #app mount point");

  const app = new PortalApp({
    fetchImpl: (input, init) => fetch(input, init),
    storage: window.sessionStorage,
    getHash: () => window.location.hash,
    setHash: (hash) => {
      if (window.location.hash !== hash) window.location.hash = hash;
    },
    render: (html) => {
      mount.innerHTML = html;
    },
  });

  window.addEventListener("hashchange", () => void app.show());

  mount.addEventListener("change", (event) => {
    const input = event.target as HTMLInputElement;
    if (input.name !== "images" || !input.files) return;
    void (async () => {
      const uploads = await Promise.all(Array.from(input.files ?? []).map(prepareUpload));
      app.setUploads(uploads);
    })();
  });

  mount.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest("[data-action=logout]");
    if (target) {
      event.preventDefault();
      app.doLogout();
      void app.show();
    }
  });

  mount.addEventListener("submit", (event) => {
    const form = event.target as HTMLFormElement;
    event.preventDefault();
    const data = new FormData(form);
    if (form.dataset.form === "login") {
      const submitter = (event as SubmitEvent).submitter as HTMLButtonElement | null;
      const login = String(data.get("login") ?? "");
      const password = String(data.get("password") ?? "");
      if (submitter?.dataset.action === "register") void app.doRegister(login, password);
      else void app.doLogin(login, password);
    } else if (form.dataset.form === "exam") {
      void app.doSubmitExam(String(data.get("age") ?? ""), String(data.get("gender") ?? ""));
    }
  });

  // register button is type=button; route it through the submit handler's
  // form data by triggering a submit with the right submitter
  mount.addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest<HTMLButtonElement>(
      "button[data-action=register]",
    );
    if (!button) return;
    event.preventDefault();
    const form = button.closest("form");
    if (!(form instanceof HTMLFormElement)) return;
    const data = new FormData(form);
    void app.doRegister(String(data.get("login") ?? ""), String(data.get("password") ?? ""));
  });

  void app.show();
}

start();
