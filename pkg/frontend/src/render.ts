/**
 * HTML rendering, framework-free. Every dynamic string goes through
 * escapeHtml; sessions hand these functions pseudonyms and views only,
 * never the credential.
 */

import type { AccountView, AnswerSpecDto, PayoutRowDto } from "./api.js";
import { ApiError } from "./api.js";
import type { TransactionViewModel } from "./viewmodel.js";
import { formatMoney } from "./viewmodel.js";

export function escapeHtml(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

/**
 * The answer entry control mirrors the allowed answer set: enumerated specs
 * render a closed choice list (free text is impossible), ranges render a
 * bounded numeric input.
 */
export function renderAnswerControl(spec: AnswerSpecDto): string {
  if (spec.variant === "Enumerated") {
    const options = (spec.options ?? [])
      .map((option) => `<option value="${escapeHtml(option)}">${escapeHtml(option)}</option>`)
      .join("");
    return `<select name="answer" data-kind="enumerated">${options}</select>`;
  }
  if (spec.variant === "IntegerRange") {
    return (
      `<input name="answer" data-kind="integer" type="number" step="1" ` +
      `min="${Number(spec.lo)}" max="${Number(spec.hi)}">`
    );
  }
  const step = spec.scale && spec.scale > 0 ? `0.${"0".repeat(spec.scale - 1)}1` : "1";
  return (
    `<input name="answer" data-kind="decimal" type="number" step="${step}" ` +
    `min="${escapeHtml(String(spec.lo))}" max="${escapeHtml(String(spec.hi))}">`
  );
}

export function describeSpec(spec: AnswerSpecDto): string {
  if (spec.variant === "Enumerated") {
    return `one of: ${(spec.options ?? []).join(", ")}`;
  }
  if (spec.variant === "IntegerRange") {
    return `an integer between ${spec.lo} and ${spec.hi}`;
  }
  return `a decimal between ${spec.lo} and ${spec.hi} (${spec.scale} digits)`;
}

export function renderPayoutPreview(preview: Record<string, PayoutRowDto[]>): string {
  const sections = Object.entries(preview)
    .map(([outcome, rows]) => {
      const lines = rows
        .map(
          (row) =>
            `<tr><td>${escapeHtml(row.source)}</td><td>→</td>` +
            `<td>${escapeHtml(row.destination)}</td>` +
            `<td class="amount" data-amount="${row.amount}">${formatMoney(row.amount)}</td>` +
            `<td>${escapeHtml(row.reason)}</td></tr>`,
        )
        .join("");
      return (
        `<details class="payout" data-outcome="${escapeHtml(outcome)}">` +
        `<summary>if ${escapeHtml(outcome)}</summary><table>${lines}</table></details>`
      );
    })
    .join("");
  return `<div class="payout-preview">${sections}</div>`;
}

export function renderBalance(account: AccountView): string {
  return (
    `<span class="balance" data-account="${escapeHtml(account.id)}" ` +
    `data-cents="${account.balance}">${formatMoney(account.balance)}</span>`
  );
}

export function renderTransaction(vm: TransactionViewModel): string {
  const { view } = vm;
  const rows: string[] = [
    `<dt>state</dt><dd class="state">${escapeHtml(view.state)} — ${escapeHtml(vm.statusLine)}</dd>`,
    `<dt>question</dt><dd>${escapeHtml(view.question_text)}</dd>`,
    `<dt>allowed answers</dt><dd>${escapeHtml(describeSpec(view.spec))}</dd>`,
    `<dt>price</dt><dd>${formatMoney(view.terms.price)}</dd>`,
    `<dt>seller stake</dt><dd>${formatMoney(view.terms.seller_stake)}</dd>`,
    `<dt>evidence deposit</dt><dd>${formatMoney(view.terms.buyer_deposit)}</dd>`,
    `<dt>answer deadline</dt><dd class="countdown">${escapeHtml(vm.answerCountdown.label)}</dd>`,
    `<dt>evidence deadline</dt><dd class="countdown">${escapeHtml(vm.evidenceCountdown.label)}</dd>`,
  ];
  if (vm.counterparty) {
    rows.push(`<dt>counterparty</dt><dd class="pseudonym">${escapeHtml(vm.counterparty)}</dd>`);
  }
  if (view.answer) {
    rows.push(`<dt>answer</dt><dd class="answer">${escapeHtml(view.answer.canonical)}</dd>`);
  }
  if (view.evidence) {
    rows.push(
      `<dt>evidence</dt><dd class="evidence">sha256 ${escapeHtml(view.evidence.digest)}</dd>`,
    );
  }
  if (view.decision) {
    rows.push(
      `<dt>ruling</dt><dd class="ruling">${escapeHtml(view.decision.verdict)}: ` +
        `${escapeHtml(view.decision.rationale)}</dd>`,
    );
  }
  if (view.settled_from) {
    rows.push(`<dt>settled from</dt><dd>${escapeHtml(view.settled_from)}</dd>`);
  }
  return (
    `<article class="transaction" data-id="${escapeHtml(view.id)}" ` +
    `data-state="${escapeHtml(view.state)}">` +
    `<h2>${escapeHtml(view.id)}</h2><dl>${rows.join("")}</dl>` +
    renderPayoutPreview(vm.preview) +
    `</article>`
  );
}

/** Server-side failures as actionable console messages, detail verbatim. */
export function renderApiError(error: unknown): string {
  if (!(error instanceof ApiError)) {
    const message = error instanceof Error ? error.message : String(error);
    return `<p class="error">unexpected failure: ${escapeHtml(message)}</p>`;
  }
  let hint: string;
  switch (error.status) {
    case 401:
      hint = "credential not recognized; register or re-enter it";
      break;
    case 402:
      hint = "insufficient funds; top up your account first";
      break;
    case 404:
      hint = "no such transaction";
      break;
    case 409:
      hint = "the transaction has moved on; refresh and retry";
      break;
    case 410:
      hint = "the deadline has passed";
      break;
    default:
      hint = "the request was rejected";
  }
  return (
    `<p class="error" data-status="${error.status}">${escapeHtml(hint)} ` +
    `<span class="detail">(${escapeHtml(error.detail)})</span></p>`
  );
}
