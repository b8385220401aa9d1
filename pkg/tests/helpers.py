"""Shared fixtures: lifecycle drivers and journal-fold oracles.

The oracles here deliberately re-derive balances from exported artifacts
(JSONL journal text, event payloads) with plain dict folds, touching none of
the package's accounting code paths.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from infomarket.adjudication import auto_verdict
from infomarket.answerspec import EnumeratedSpec
from infomarket.ledger import AccountKind, Ledger
from infomarket.protocol import Exchange, Terms, Transaction, TxnState, Verdict

# The desk-scale terms used across settlement tests: $2,000 price, $1,000
# stake, $400 deposit, $50 per-side fees, in cents.
STANDARD_TERMS = Terms(
    price=200000,
    seller_stake=100000,
    buyer_deposit=40000,
    buyer_fee=5000,
    seller_fee=5000,
    answer_deadline=1000,
    evidence_deadline=2000,
)

BINDING_SPEC = EnumeratedSpec(("compound-17", "compound-42", "none"))

TERMINAL_PATHS = (
    "correct",
    "incorrect",
    "insufficient",
    "rejected",
    "unanswered",
    "unverified",
    "unaccepted",
)


@dataclass
class PathResult:
    ledger: Ledger
    exchange: Exchange
    txn: Transaction
    buyer_account: str
    seller_account: str
    buyer_funded: int
    seller_funded: int

    def net(self, account: str) -> int:
        funded = {
            self.buyer_account: self.buyer_funded,
            self.seller_account: self.seller_funded,
        }.get(account, 0)
        return self.ledger.balance_of(account) - funded


def attestation(outcome: str, note: str = "assay complete") -> bytes:
    return json.dumps({"claimed_outcome": outcome, "supporting_note": note}).encode()


def run_terminal_path(path: str, terms: Terms = STANDARD_TERMS) -> PathResult:
    """Drive one transaction to settlement along the named terminal path."""
    assert path in TERMINAL_PATHS, path
    ledger = Ledger()
    exchange = Exchange(ledger)
    buyer_account = exchange.register_party("qbuyer", AccountKind.BUYER)
    seller_account = exchange.register_party("aseller", AccountKind.SELLER)
    buyer_funded = terms.price + terms.buyer_deposit + terms.buyer_fee
    seller_funded = terms.seller_stake + terms.seller_fee
    ledger.fund(buyer_account, buyer_funded)
    ledger.fund(seller_account, seller_funded)

    txn = exchange.create_question("qbuyer", "what binds the target?", BINDING_SPEC, terms)
    exchange.post_question(txn)

    if path == "unaccepted":
        exchange.advance_time(txn, terms.answer_deadline + 1)
    else:
        exchange.accept_question(txn, "aseller", now=0)
        if path == "unanswered":
            exchange.advance_time(txn, terms.answer_deadline + 1)
        elif path == "rejected":
            exchange.submit_answer(txn, "aseller", "compound-99", now=0)
        else:
            exchange.submit_answer(txn, "aseller", "compound-17", now=0)
            if path == "unverified":
                exchange.advance_time(txn, terms.evidence_deadline + 1)
            else:
                body = {
                    "correct": attestation("compound-17"),
                    "incorrect": attestation("none"),
                    "insufficient": b"corrupt-bytes",
                }[path]
                exchange.submit_evidence(txn, "qbuyer", body, now=terms.answer_deadline + 1)
                decision = auto_verdict(txn.spec, txn.answer, txn.evidence)
                exchange.adjudicate(txn, decision.verdict)
    exchange.settle(txn)
    assert txn.state is TxnState.SETTLED
    return PathResult(
        ledger=ledger,
        exchange=exchange,
        txn=txn,
        buyer_account=buyer_account.id,
        seller_account=seller_account.id,
        buyer_funded=buyer_funded,
        seller_funded=seller_funded,
    )


VERDICT_FOR_PATH = {
    "correct": Verdict.CORRECT,
    "incorrect": Verdict.INCORRECT,
    "insufficient": Verdict.INSUFFICIENT_EVIDENCE,
    "rejected": None,
    "unanswered": None,
    "unverified": None,
    "unaccepted": None,
}


def fold_journal(journal_text: str) -> dict[str, int]:
    """Oracle: balances from an exported JSONL journal, by plain dict fold."""
    balances: dict[str, int] = {}
    for line in journal_text.splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        amount = record["amount"]
        assert amount > 0, "journal contains a non-positive amount"
        if record["debit"] is not None:
            balances[record["debit"]] = balances.get(record["debit"], 0) - amount
        balances[record["credit"]] = balances.get(record["credit"], 0) + amount
    return balances


def journal_issuance(journal_text: str) -> int:
    """Oracle: total supply is whatever the funding records deposited."""
    total = 0
    for line in journal_text.splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if record["debit"] is None:
            total += record["amount"]
    return total
