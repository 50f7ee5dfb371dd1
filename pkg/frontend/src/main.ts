/** Page wiring. State lives on the server; this file moves strings around.
 *
 * The session id rides in the URL hash, so reloading the page resumes the
 * same session from /state with nothing lost.
 */

import { ApiError, SessionClient } from "./api.js";
import { parseDataset, type DisplayData } from "./csv.js";
import { AnswerFlow } from "./flow.js";
import { page } from "./render.js";
import type { Relation } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
};

let display: DisplayData | null = null;
let flow: AnswerFlow | null = null;
let client: SessionClient | null = null;

function renderCurrent(): void {
  if (flow !== null) {
    $("app").innerHTML = page(flow.view, display);
  }
}

function showError(error: unknown): void {
  const message = error instanceof ApiError
    ? `server said ${error.status}: ${error.message}`
    : String(error);
  $("status").textContent = message;
}

async function judge(relation: Relation): Promise<void> {
  if (flow === null) {
    return;
  }
  for (const button of document.querySelectorAll("button")) {
    button.setAttribute("disabled", "");
  }
  try {
    await flow.submit(relation);
    $("status").textContent = "";
  } catch (error) {
    showError(error);
  } finally {
    for (const button of document.querySelectorAll("button")) {
      button.removeAttribute("disabled");
    }
    renderCurrent();
  }
}

async function begin(resumeId: string | null): Promise<void> {
  const base = ($("base-url") as HTMLInputElement).value.trim() || window.location.origin;
  client = new SessionClient(base);
  try {
    let id = resumeId;
    if (id === null) {
      const raw = ($("config") as HTMLTextAreaElement).value.trim();
      const config: unknown = raw === "" ? {} : JSON.parse(raw);
      id = (await client.create(config)).session_id;
    }
    window.location.hash = id;
    flow = new AnswerFlow(client, id);
    await flow.start();
    $("status").textContent = "";
    $("setup").setAttribute("hidden", "");
  } catch (error) {
    showError(error);
    return;
  }
  renderCurrent();
}

function wire(): void {
  $("start").addEventListener("click", () => void begin(null));
  ($("dataset") as HTMLInputElement).addEventListener("change", async (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (file !== undefined) {
      try {
        display = parseDataset(await file.text());
        $("status").textContent = `${display.rows.length} instances loaded for display`;
      } catch (error) {
        showError(error);
      }
      renderCurrent();
    }
  });
  // Buttons are re-created on every render; delegate from the container.
  $("app").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.id === "btn-similar") {
      void judge("similar");
    } else if (target.id === "btn-dissimilar") {
      void judge("dissimilar");
    }
  });
  const fromHash = window.location.hash.replace(/^#/, "");
  if (fromHash !== "") {
    void begin(fromHash);
  }
}

wire();
