/**
 * Browser bootstrap: pick a role, register or paste a credential, then
 * operate one transaction at a time. State lives on the server; the page
 * polls and tolerates staleness (a conflicting action just renders the
 * server's error and the next poll resolves it).
 */

import { ApiClient } from "./api.js";
import { ArbiterConsole, BuyerConsole, RoleConsole, SellerConsole } from "./consoles.js";

const POLL_MS = 2000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let api: ApiClient | null = null;
let activeConsole: RoleConsole | null = null;
let watchedTxn: string | null = null;
let pollTimer: number | null = null;

async function connect(): Promise<void> {
  const baseUrl = (el<HTMLInputElement>("base-url").value || "").replace(/\/$/, "");
  const role = el<HTMLSelectElement>("role").value as "buyer" | "seller" | "arbiter";
  api = new ApiClient(baseUrl);
  const capability = role === "buyer" ? "buy" : role === "seller" ? "sell" : "arbitrate";
  const registration = await api.register([capability]);
  api.setCredential(registration.credential);
  const session = {
    pseudonym: registration.pseudonym,
    accountId: registration.account_id,
    role,
  } as const;
  activeConsole =
    role === "buyer"
      ? new BuyerConsole(api, session)
      : role === "seller"
        ? new SellerConsole(api, session)
        : new ArbiterConsole(api, session);
  el("session-info").textContent =
    `registered as ${registration.pseudonym} (${role}); ` +
    `account ${registration.account_id ?? "none"} — fund it via the admin faucet`;
  el("workbench").hidden = false;
  void refreshBalance();
}

async function refreshBalance(): Promise<void> {
  if (!activeConsole) return;
  el("balance").innerHTML = await activeConsole.balanceWidget();
}

async function watch(): Promise<void> {
  watchedTxn = el<HTMLInputElement>("txn-id").value.trim();
  if (pollTimer !== null) window.clearInterval(pollTimer);
  pollTimer = window.setInterval(() => void poll(), POLL_MS);
  await poll();
}

async function poll(): Promise<void> {
  if (!activeConsole || !watchedTxn) return;
  const result = await activeConsole.refresh(watchedTxn);
  el("transaction").innerHTML = result.html;
  await refreshBalance();
  if (activeConsole instanceof SellerConsole && result.view?.state === "Accepted") {
    el("answer-area").innerHTML = await activeConsole.answerForm(watchedTxn);
    wireAnswerForm();
  }
}

function wireAnswerForm(): void {
  const form = document.querySelector<HTMLFormElement>(".answer-form");
  if (!form || !(activeConsole instanceof SellerConsole)) return;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const control = form.querySelector<HTMLInputElement | HTMLSelectElement>("[name=answer]");
    if (!control || !watchedTxn) return;
    void (activeConsole as SellerConsole)
      .answer(watchedTxn, control.value)
      .then((result) => {
        el("transaction").innerHTML = result.html;
      });
  });
}

function wire(): void {
  el("connect").addEventListener("click", () => void connect().catch(showFatal));
  el("watch").addEventListener("click", () => void watch().catch(showFatal));
  el("action-post").addEventListener("click", () => void act("post"));
  el("action-accept").addEventListener("click", () => void act("accept"));
  el("action-evidence").addEventListener("click", () => void act("evidence"));
  el("action-adjudicate").addEventListener("click", () => void act("adjudicate"));
  el("action-settle").addEventListener("click", () => void act("settle"));
}

async function act(kind: string): Promise<void> {
  if (!activeConsole || !watchedTxn) return;
  let html = "";
  if (kind === "post" && activeConsole instanceof BuyerConsole) {
    html = (await activeConsole.post(watchedTxn)).html;
  } else if (kind === "accept" && activeConsole instanceof SellerConsole) {
    html = (await activeConsole.accept(watchedTxn)).html;
  } else if (kind === "evidence" && activeConsole instanceof BuyerConsole) {
    const outcome = el<HTMLInputElement>("evidence-outcome").value;
    const note = el<HTMLInputElement>("evidence-note").value;
    html = (await activeConsole.submitEvidence(watchedTxn, outcome, note)).html;
  } else if (kind === "adjudicate") {
    if (activeConsole instanceof ArbiterConsole) {
      const verdict = el<HTMLSelectElement>("verdict").value;
      const rationale = el<HTMLInputElement>("rationale").value;
      html = (await activeConsole.rule(watchedTxn, verdict, rationale)).html;
    } else if (activeConsole instanceof BuyerConsole) {
      html = (await activeConsole.requestAdjudication(watchedTxn)).html;
    }
  } else if (kind === "settle") {
    html = (await activeConsole.settle(watchedTxn)).html;
  }
  if (html) {
    el("transaction").innerHTML = html;
    await refreshBalance();
  }
}

function showFatal(error: unknown): void {
  el("session-info").textContent = error instanceof Error ? error.message : String(error);
}

document.addEventListener("DOMContentLoaded", wire);
