/**
 * Typed client for the exchange HTTP API.
 *
 * The credential lives only inside this object in memory; nothing here
 * writes it to storage or into markup. Server errors become ApiError with
 * the status code and the server's own detail text, surfaced verbatim.
 */

export interface RegisterResponse {
  pseudonym: string;
  credential: string;
  capabilities: string[];
  account_id: string | null;
}

export interface AnswerSpecDto {
  variant: "Enumerated" | "IntegerRange" | "DecimalRange";
  options?: string[];
  lo?: number | string;
  hi?: number | string;
  scale?: number;
}

export interface TermsDto {
  price: number;
  seller_stake: number;
  buyer_deposit: number;
  buyer_fee: number;
  seller_fee: number;
  answer_deadline: number;
  evidence_deadline: number;
}

export interface PayoutRowDto {
  source: string;
  destination: string;
  amount: number;
  reason: string;
}

export interface DecisionDto {
  verdict: string;
  rationale: string;
  decided_at: number;
  policy_used: string;
}

export interface TransactionView {
  id: string;
  buyer: string;
  seller: string | null;
  question_text: string;
  spec: AnswerSpecDto;
  terms: TermsDto;
  state: string;
  answer: { raw: string; canonical: string } | null;
  evidence: { digest: string; submitted_at: number; body_b64?: string } | null;
  verdict: string | null;
  settled_from: string | null;
  escrow_account: string;
  your_role: string;
  now: number;
  escrow_balance: number;
  policy: { variant: string; arbiter?: string } | null;
  decision: DecisionDto | null;
  payout_preview: Record<string, PayoutRowDto[]>;
}

export interface AccountView {
  id: string;
  kind: string;
  balance: number;
}

export interface DraftQuestion {
  question_text: string;
  spec: AnswerSpecDto;
  terms: Partial<TermsDto>;
  policy?: { variant: string; arbiter?: string };
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly errorKind: string,
    public readonly detail: string,
  ) {
    super(`${status} ${errorKind}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private credential: string | null = null,
  ) {}

  setCredential(credential: string): void {
    this.credential = credential;
  }

  get hasCredential(): boolean {
    return this.credential !== null;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.credential) {
      headers["X-Credential"] = this.credential;
    }
    const response = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    let parsed: unknown = null;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      parsed = null;
    }
    if (!response.ok) {
      const record = (parsed ?? {}) as { error?: string; detail?: string };
      throw new ApiError(
        response.status,
        record.error ?? "Error",
        record.detail ?? text ?? response.statusText,
      );
    }
    return parsed as T;
  }

  register(capabilities: string[]): Promise<RegisterResponse> {
    return this.request("POST", "/register", { capabilities });
  }

  fund(accountId: string, amount: number): Promise<AccountView> {
    return this.request("POST", "/admin/fund", { account_id: accountId, amount });
  }

  tick(seconds: number): Promise<{ now: number }> {
    return this.request("POST", "/admin/tick", { seconds });
  }

  createQuestion(draft: DraftQuestion): Promise<TransactionView> {
    return this.request("POST", "/questions", draft);
  }

  postQuestion(id: string): Promise<TransactionView> {
    return this.request("POST", `/questions/${id}/post`);
  }

  accept(id: string): Promise<TransactionView> {
    return this.request("POST", `/questions/${id}/accept`);
  }

  answer(id: string, answer: string): Promise<TransactionView> {
    return this.request("POST", `/questions/${id}/answer`, { answer });
  }

  submitEvidence(id: string, body: string): Promise<TransactionView> {
    return this.request("POST", `/questions/${id}/evidence`, { body });
  }

  adjudicate(id: string, verdict?: string, rationale?: string): Promise<TransactionView> {
    return this.request("POST", `/questions/${id}/adjudicate`, { verdict, rationale });
  }

  settle(id: string): Promise<TransactionView> {
    return this.request("POST", `/questions/${id}/settle`);
  }

  getQuestion(id: string): Promise<TransactionView> {
    return this.request("GET", `/questions/${id}`);
  }

  getAccount(id: string): Promise<AccountView> {
    return this.request("GET", `/accounts/${id}`);
  }
}
