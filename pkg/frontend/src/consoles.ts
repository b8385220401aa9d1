/**
 * Role consoles: thin orchestration between the API client and the
 * renderers. Each action performs one API call and returns the markup a
 * human would see afterwards; polling is just refresh() on an interval.
 *
 * The session keeps the credential inside the ApiClient only; console
 * state holds pseudonym, role, and account id, which are the only
 * identity-ish strings that may reach the page.
 */

import type { ApiClient, DraftQuestion, TransactionView } from "./api.js";
import { renderApiError, renderAnswerControl, renderBalance, renderTransaction } from "./render.js";
import { buildViewModel } from "./viewmodel.js";

export interface ConsoleSession {
  pseudonym: string;
  accountId: string | null;
  role: "buyer" | "seller" | "arbiter";
}

export interface ActionResult {
  html: string;
  view: TransactionView | null;
}

function shown(view: TransactionView): ActionResult {
  return { html: renderTransaction(buildViewModel(view)), view };
}

function failed(error: unknown): ActionResult {
  return { html: renderApiError(error), view: null };
}

export class RoleConsole {
  constructor(
    protected readonly api: ApiClient,
    readonly session: ConsoleSession,
  ) {}

  /** Poll target: re-fetch and re-render one transaction. */
  async refresh(txnId: string): Promise<ActionResult> {
    try {
      return shown(await this.api.getQuestion(txnId));
    } catch (error) {
      return failed(error);
    }
  }

  /** The session's own account balance widget. */
  async balanceWidget(): Promise<string> {
    if (!this.session.accountId) {
      return `<span class="balance" data-cents="0">—</span>`;
    }
    try {
      return renderBalance(await this.api.getAccount(this.session.accountId));
    } catch (error) {
      return renderApiError(error);
    }
  }

  async settle(txnId: string): Promise<ActionResult> {
    try {
      return shown(await this.api.settle(txnId));
    } catch (error) {
      return failed(error);
    }
  }
}

export class BuyerConsole extends RoleConsole {
  async draft(question: DraftQuestion): Promise<ActionResult> {
    try {
      return shown(await this.api.createQuestion(question));
    } catch (error) {
      return failed(error);
    }
  }

  async post(txnId: string): Promise<ActionResult> {
    try {
      return shown(await this.api.postQuestion(txnId));
    } catch (error) {
      return failed(error);
    }
  }

  async submitEvidence(txnId: string, claimedOutcome: string, note: string): Promise<ActionResult> {
    const body = JSON.stringify({ claimed_outcome: claimedOutcome, supporting_note: note });
    try {
      return shown(await this.api.submitEvidence(txnId, body));
    } catch (error) {
      return failed(error);
    }
  }

  /** Trigger mechanical adjudication once evidence is in. */
  async requestAdjudication(txnId: string): Promise<ActionResult> {
    try {
      return shown(await this.api.adjudicate(txnId));
    } catch (error) {
      return failed(error);
    }
  }
}

export class SellerConsole extends RoleConsole {
  /** Review an open listing (by id, obtained out of band) before staking. */
  async review(txnId: string): Promise<ActionResult> {
    return this.refresh(txnId);
  }

  async accept(txnId: string): Promise<ActionResult> {
    try {
      return shown(await this.api.accept(txnId));
    } catch (error) {
      return failed(error);
    }
  }

  /** The entry control mirrors the allowed answer set. */
  async answerForm(txnId: string): Promise<string> {
    try {
      const view = await this.api.getQuestion(txnId);
      return (
        `<form class="answer-form" data-id="${view.id}">` +
        renderAnswerControl(view.spec) +
        `<button type="submit">submit answer</button></form>`
      );
    } catch (error) {
      return renderApiError(error);
    }
  }

  async answer(txnId: string, value: string): Promise<ActionResult> {
    try {
      return shown(await this.api.answer(txnId, value));
    } catch (error) {
      return failed(error);
    }
  }
}

export class ArbiterConsole extends RoleConsole {
  async rule(txnId: string, verdict: string, rationale: string): Promise<ActionResult> {
    try {
      return shown(await this.api.adjudicate(txnId, verdict, rationale));
    } catch (error) {
      return failed(error);
    }
  }
}
