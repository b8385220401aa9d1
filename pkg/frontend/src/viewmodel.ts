/**
 * Display model derived from a server transaction view.
 *
 * Payout previews are passed through verbatim from the server, which
 * computes them from the settlement table itself; nothing here re-derives
 * a payout number.
 */

import type { PayoutRowDto, TransactionView } from "./api.js";

export interface Countdown {
  deadline: number;
  secondsLeft: number;
  expired: boolean;
  label: string;
}

export interface TransactionViewModel {
  view: TransactionView;
  answerCountdown: Countdown;
  evidenceCountdown: Countdown;
  counterparty: string | null;
  statusLine: string;
  preview: Record<string, PayoutRowDto[]>;
}

/** Deadlines are inclusive: at exactly the deadline there is still time. */
export function countdown(deadline: number, now: number): Countdown {
  const secondsLeft = deadline - now;
  const expired = secondsLeft < 0;
  return {
    deadline,
    secondsLeft,
    expired,
    label: expired ? "expired" : formatDuration(secondsLeft),
  };
}

export function formatDuration(totalSeconds: number): string {
  const days = Math.floor(totalSeconds / 86400);
  const hours = Math.floor((totalSeconds % 86400) / 3600);
  const minutes = Math.floor((totalSeconds % 3600) / 60);
  const seconds = totalSeconds % 60;
  if (days > 0) return `${days}d ${hours}h left`;
  if (hours > 0) return `${hours}h ${minutes}m left`;
  if (minutes > 0) return `${minutes}m ${seconds}s left`;
  return `${seconds}s left`;
}

export function formatMoney(cents: number): string {
  const sign = cents < 0 ? "-" : "";
  const magnitude = Math.abs(cents);
  const dollars = Math.floor(magnitude / 100);
  const rest = String(magnitude % 100).padStart(2, "0");
  return `${sign}$${dollars.toLocaleString("en-US")}.${rest}`;
}

const STATUS_LINES: Record<string, string> = {
  Draft: "draft, not yet posted",
  Posted: "awaiting a seller",
  Accepted: "awaiting the seller's answer",
  Answered: "answered, awaiting the buyer's evidence",
  AnswerRejected: "answer was outside the allowed set, awaiting settlement",
  EvidenceSubmitted: "evidence in, awaiting adjudication",
  Adjudicated: "adjudicated, awaiting settlement",
  Settled: "settled",
  ExpiredUnaccepted: "no seller accepted in time, awaiting settlement",
  ExpiredUnanswered: "no answer arrived in time, awaiting settlement",
  ExpiredUnverified: "no evidence arrived in time, awaiting settlement",
};

export function buildViewModel(view: TransactionView): TransactionViewModel {
  const counterparty =
    view.your_role === "buyer"
      ? view.seller
      : view.your_role === "seller" || view.your_role === "prospective_seller"
        ? view.buyer
        : null;
  return {
    view,
    answerCountdown: countdown(view.terms.answer_deadline, view.now),
    evidenceCountdown: countdown(view.terms.evidence_deadline, view.now),
    counterparty,
    statusLine: STATUS_LINES[view.state] ?? view.state,
    preview: view.payout_preview,
  };
}
