/** DOM wiring for the review page. Pure logic lives in state/highlight/retry. */

import { ApiClient, ConflictError, NotFoundError } from "./api.js";
import { VerdictOutbox } from "./retry.js";
import { ReviewState } from "./state.js";
import type { Meta } from "./types.js";

const api = new ApiClient("");
const outbox = new VerdictOutbox(window.localStorage);
const state = new ReviewState();
let meta: Meta;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderAbstract(): void {
  const host = el<HTMLDivElement>("abstract");
  host.textContent = "";
  for (const seg of state.segments) {
    const span = document.createElement("span");
    span.textContent = seg.text;
    if (seg.kind !== "plain") span.className = `hl-${seg.kind}`;
    host.appendChild(span);
  }
}

function renderProgress(): void {
  const rows = Object.entries(state.progress)
    .map(([ptm, p]) => `${ptm}: ${p.reviewed}/${p.total}`)
    .join("  ·  ");
  el("progress").textContent = rows || "queue empty";
  const unsent = outbox.size;
  el("outbox").textContent = unsent ? `${unsent} unsent verdict(s) queued for retry` : "";
}

function render(): void {
  const item = state.current;
  el("no-trigger").hidden = !state.noTriggerWarning;
  if (!item) {
    el("triplet").textContent = "No pending items.";
    el<HTMLDivElement>("abstract").textContent = "";
    el<HTMLButtonElement>("submit").disabled = true;
    renderProgress();
    return;
  }
  el("triplet").textContent = `${item.a}  —${item.ptm}→  ${item.b}   (PMID ${item.pmid})`;
  el("stats").textContent = `confidence ${item.confidence.toFixed(3)}, std ${item.std.toFixed(3)}`;
  renderAbstract();
  for (const d of ["correct", "incorrect", "unsure"] as const) {
    el<HTMLButtonElement>(`decision-${d}`).classList.toggle("selected", state.decision === d);
  }
  const select = el<HTMLSelectElement>("category");
  select.disabled = !state.categoryEnabled;
  select.value = state.category ?? "";
  el<HTMLButtonElement>("submit").disabled = !state.submitEnabled;
  renderProgress();
}

async function flushOutbox(): Promise<void> {
  await outbox.flush(
    async (itemId, body) => {
      await api.submitVerdict(itemId, body);
    },
    (error) => error instanceof ConflictError || error instanceof NotFoundError,
  );
  renderProgress();
}

async function submit(): Promise<void> {
  const item = state.current;
  if (!item || !state.submitEnabled) return;
  const body = state.buildVerdict();
  outbox.enqueue(item.item_id, body); // staged before the POST: reloads never lose it
  try {
    await api.submitVerdict(item.item_id, body);
    outbox.remove(item.item_id);
    state.advance(true);
  } catch (error) {
    if (error instanceof ConflictError || error instanceof NotFoundError) {
      outbox.remove(item.item_id); // stale item, surface and skip
      el("status").textContent = `item ${item.item_id} already reviewed elsewhere; skipped`;
      state.advance(false);
    } else {
      el("status").textContent = "service unreachable; verdict queued for retry";
      state.advance(false);
    }
  }
  render();
}

async function init(): Promise<void> {
  meta = await api.meta();
  const select = el<HTMLSelectElement>("category");
  select.appendChild(new Option("— category —", ""));
  for (const category of meta.categories) select.appendChild(new Option(category, category));

  el<HTMLInputElement>("reviewer").addEventListener("input", (e) => {
    state.reviewer = (e.target as HTMLInputElement).value;
  });
  for (const d of ["correct", "incorrect", "unsure"] as const) {
    el<HTMLButtonElement>(`decision-${d}`).addEventListener("click", () => {
      state.selectDecision(d);
      render();
    });
  }
  select.addEventListener("change", () => {
    if (select.value) state.selectCategory(select.value);
    render();
  });
  el<HTMLButtonElement>("submit").addEventListener("click", () => void submit());
  el<HTMLButtonElement>("skip").addEventListener("click", () => {
    state.advance(false);
    render();
  });
  document.addEventListener("keydown", (e) => {
    if ((e.target as HTMLElement).tagName === "INPUT") return;
    if (state.handleKey(e.key)) render();
  });

  await flushOutbox(); // unsent verdicts from a previous session go first
  const items = await api.items({ status: "pending" });
  state.loadQueue(items);
  render();
  setInterval(() => void flushOutbox(), 15000);
}

void init().catch((error) => {
  el("status").textContent = `failed to initialise: ${error}`;
});
