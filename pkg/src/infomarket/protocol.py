"""Transaction lifecycle and settlement rules.

One transaction is a brokered exchange: a buyer escrows the answer price plus
a refundable evidence deposit, a seller escrows an at-risk stake, and the
exchange collects flat fees from each side at the moment it brokers. The
settlement table below is the contract everything else is tested against:

    state / verdict            escrow pays out as
    -------------------------  ------------------------------------------
    Adjudicated Correct        price+stake -> seller, deposit -> buyer
    Adjudicated Incorrect      price+stake -> sink,   deposit -> buyer
    Adjudicated Insufficient   price+stake -> seller, deposit -> sink
    AnswerRejected             stake -> sink, price+deposit -> buyer
    ExpiredUnanswered          stake -> sink, price+deposit -> buyer
    ExpiredUnverified          price+stake -> seller, deposit -> sink
    ExpiredUnaccepted          price+deposit -> buyer, buyer fee refunded

Two consequences drive the table: the buyer's outlay is identical whether the
answer proves right or wrong (deposit returned either way), and the exchange
fee never depends on the outcome. Forfeited money therefore goes to a neutral
sink: it may enrich neither the counterparty nor the exchange.

Missing or insufficient evidence settles in the seller's favor: the deposit
exists precisely to make the buyer verify, and a buyer-favorable default
would let buyers collect answers and then withhold verification to claw the
price back.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .answerspec import (
    AnswerSpec,
    AnswerValue,
    InvalidSpec,
    Membership,
    evaluate_answer,
    validate_spec,
)
from .ledger import AccountId, AccountKind, InsufficientFunds, Ledger, Reason


class TxnState(str, Enum):
    DRAFT = "Draft"
    POSTED = "Posted"
    ACCEPTED = "Accepted"
    ANSWERED = "Answered"
    ANSWER_REJECTED = "AnswerRejected"
    EVIDENCE_SUBMITTED = "EvidenceSubmitted"
    ADJUDICATED = "Adjudicated"
    SETTLED = "Settled"
    EXPIRED_UNACCEPTED = "ExpiredUnaccepted"
    EXPIRED_UNANSWERED = "ExpiredUnanswered"
    EXPIRED_UNVERIFIED = "ExpiredUnverified"


# States settle() accepts; every other (state, operation) pair is WrongState.
SETTLEABLE_STATES = frozenset(
    {
        TxnState.ADJUDICATED,
        TxnState.ANSWER_REJECTED,
        TxnState.EXPIRED_UNANSWERED,
        TxnState.EXPIRED_UNVERIFIED,
        TxnState.EXPIRED_UNACCEPTED,
    }
)


class Verdict(str, Enum):
    CORRECT = "Correct"
    INCORRECT = "Incorrect"
    INSUFFICIENT_EVIDENCE = "InsufficientEvidence"


class ProtocolError(Exception):
    """Base class for lifecycle violations."""


class WrongState(ProtocolError):
    pass


class DeadlinePassed(ProtocolError):
    pass


class SelfDealing(ProtocolError):
    pass


class NotSeller(ProtocolError):
    pass


class NotBuyer(ProtocolError):
    pass


class InvalidTerms(ProtocolError):
    pass


class EscrowMismatch(ProtocolError):
    """Escrow balance differs from what the payout table expects."""


class UnknownTransaction(ProtocolError):
    pass


class UnknownParty(ProtocolError):
    pass


@dataclass(frozen=True, slots=True)
class Terms:
    """Money and time parameters of one transaction, in minor units / epoch seconds.

    All deadlines are inclusive: an action at exactly the deadline is timely.
    Fees are flat amounts fixed up front, which is the simplest structure
    that keeps exchange revenue independent of the outcome.
    """

    price: int
    seller_stake: int
    buyer_deposit: int
    buyer_fee: int
    seller_fee: int
    answer_deadline: int
    evidence_deadline: int

    def __post_init__(self) -> None:
        for name in ("price", "seller_stake", "buyer_deposit"):
            if getattr(self, name) <= 0:
                raise InvalidTerms(f"{name} must be > 0")
        for name in ("buyer_fee", "seller_fee"):
            if getattr(self, name) < 0:
                raise InvalidTerms(f"{name} must be >= 0")
        for name in (
            "price",
            "seller_stake",
            "buyer_deposit",
            "buyer_fee",
            "seller_fee",
            "answer_deadline",
            "evidence_deadline",
        ):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise InvalidTerms(f"{name} must be an integer, got {value!r}")
        if self.answer_deadline >= self.evidence_deadline:
            raise InvalidTerms("answer_deadline must precede evidence_deadline")

    def to_dict(self) -> dict:
        return {
            "price": self.price,
            "seller_stake": self.seller_stake,
            "buyer_deposit": self.buyer_deposit,
            "buyer_fee": self.buyer_fee,
            "seller_fee": self.seller_fee,
            "answer_deadline": self.answer_deadline,
            "evidence_deadline": self.evidence_deadline,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Terms":
        try:
            return cls(
                price=data["price"],
                seller_stake=data["seller_stake"],
                buyer_deposit=data["buyer_deposit"],
                buyer_fee=data["buyer_fee"],
                seller_fee=data["seller_fee"],
                answer_deadline=data["answer_deadline"],
                evidence_deadline=data["evidence_deadline"],
            )
        except KeyError as exc:
            raise InvalidTerms(f"missing terms field: {exc}") from exc


@dataclass(frozen=True, slots=True)
class EvidenceRecord:
    body: bytes
    digest: str
    submitted_at: int

    @classmethod
    def create(cls, body: bytes, submitted_at: int) -> "EvidenceRecord":
        return cls(body=body, digest=hashlib.sha256(body).hexdigest(), submitted_at=submitted_at)


@dataclass(slots=True)
class Transaction:
    id: str
    buyer: str
    question_text: str
    spec: AnswerSpec
    terms: Terms
    escrow_account: AccountId
    state: TxnState = TxnState.DRAFT
    seller: Optional[str] = None
    answer: Optional[AnswerValue] = None
    evidence: Optional[EvidenceRecord] = None
    verdict: Optional[Verdict] = None
    # audit: which payout-table row ran (the state settle() was called from)
    settled_from: Optional[TxnState] = None


@dataclass(frozen=True, slots=True)
class PayoutRow:
    """One planned settlement movement, before it is posted to the ledger."""

    source: str  # "escrow" or "exchange_fee"
    destination: str  # "buyer", "seller", or "sink"
    amount: int
    reason: Reason


def payout_rows(state: TxnState, verdict: Optional[Verdict], terms: Terms) -> list[PayoutRow]:
    """The settlement table for one terminal path.

    This is the single source of truth: settle() posts exactly these rows and
    the service's payout previews are computed from the same function.
    Zero-amount rows (possible only for zero fees) are omitted.
    """
    p, s, d = terms.price, terms.seller_stake, terms.buyer_deposit
    if state is TxnState.ADJUDICATED:
        if verdict is Verdict.CORRECT:
            rows = [
                PayoutRow("escrow", "seller", p, Reason.PAYOUT_PRICE),
                PayoutRow("escrow", "seller", s, Reason.RETURN_STAKE),
                PayoutRow("escrow", "buyer", d, Reason.RETURN_DEPOSIT),
            ]
        elif verdict is Verdict.INCORRECT:
            rows = [
                PayoutRow("escrow", "sink", p, Reason.SINK_PRICE),
                PayoutRow("escrow", "sink", s, Reason.FORFEIT_STAKE),
                PayoutRow("escrow", "buyer", d, Reason.RETURN_DEPOSIT),
            ]
        elif verdict is Verdict.INSUFFICIENT_EVIDENCE:
            rows = [
                PayoutRow("escrow", "seller", p, Reason.PAYOUT_PRICE),
                PayoutRow("escrow", "seller", s, Reason.RETURN_STAKE),
                PayoutRow("escrow", "sink", d, Reason.FORFEIT_DEPOSIT),
            ]
        else:
            raise WrongState("adjudicated transaction carries no verdict")
    elif state in (TxnState.ANSWER_REJECTED, TxnState.EXPIRED_UNANSWERED):
        rows = [
            PayoutRow("escrow", "sink", s, Reason.FORFEIT_STAKE),
            PayoutRow("escrow", "buyer", p, Reason.REFUND),
            PayoutRow("escrow", "buyer", d, Reason.RETURN_DEPOSIT),
        ]
    elif state is TxnState.EXPIRED_UNVERIFIED:
        rows = [
            PayoutRow("escrow", "seller", p, Reason.PAYOUT_PRICE),
            PayoutRow("escrow", "seller", s, Reason.RETURN_STAKE),
            PayoutRow("escrow", "sink", d, Reason.FORFEIT_DEPOSIT),
        ]
    elif state is TxnState.EXPIRED_UNACCEPTED:
        # No brokering happened, so the buyer fee is handed back too.
        rows = [
            PayoutRow("escrow", "buyer", p, Reason.REFUND),
            PayoutRow("escrow", "buyer", d, Reason.RETURN_DEPOSIT),
            PayoutRow("exchange_fee", "buyer", terms.buyer_fee, Reason.REFUND),
        ]
    else:
        raise WrongState(f"{state.value} is not a settleable state")
    return [row for row in rows if row.amount > 0]


def expected_escrow(state: TxnState, terms: Terms) -> int:
    """Escrow balance the payout table assumes for a settleable state."""
    if state is TxnState.EXPIRED_UNACCEPTED:
        return terms.price + terms.buyer_deposit
    return terms.price + terms.buyer_deposit + terms.seller_stake


class Exchange:
    """Lifecycle engine for brokered transactions over one ledger.

    Owns the singleton fee and sink accounts, the party -> account registry,
    and the transaction store. Each operation validates its preconditions in
    full before touching the ledger, so a rejected call leaves no entries.
    """

    def __init__(self, ledger: Optional[Ledger] = None) -> None:
        self.ledger = ledger if ledger is not None else Ledger()
        self.fee_account = self.ledger.open_account(AccountKind.EXCHANGE_FEE)
        self.sink_account = self.ledger.open_account(AccountKind.SINK)
        self.transactions: dict[str, Transaction] = {}
        self._accounts: dict[str, AccountId] = {}
        self._txn_counter = 0

    # -- parties ---------------------------------------------------------

    def register_party(self, pseudonym: str, kind: AccountKind = AccountKind.BUYER) -> AccountId:
        if pseudonym in self._accounts:
            raise ProtocolError(f"party {pseudonym!r} already registered")
        account = self.ledger.open_account(kind, owner=pseudonym)
        self._accounts[pseudonym] = account
        return account

    def account_for(self, pseudonym: str) -> AccountId:
        try:
            return self._accounts[pseudonym]
        except KeyError:
            raise UnknownParty(pseudonym) from None

    # -- lifecycle operations ---------------------------------------------

    def create_question(
        self,
        buyer: str,
        text: str,
        spec: AnswerSpec,
        terms: Terms,
    ) -> Transaction:
        """Draft a question; no money moves until it is posted."""
        if buyer not in self._accounts:
            raise UnknownParty(buyer)
        validate_spec(spec)
        if not isinstance(terms, Terms):
            raise InvalidTerms(f"expected Terms, got {type(terms).__name__}")
        self._txn_counter += 1
        txn_id = f"txn-{self._txn_counter:04d}"
        escrow = self.ledger.open_account(AccountKind.ESCROW, owner=txn_id)
        txn = Transaction(
            id=txn_id,
            buyer=buyer,
            question_text=text,
            spec=spec,
            terms=terms,
            escrow_account=escrow,
        )
        self.transactions[txn_id] = txn
        return txn

    def post_question(self, txn: Transaction) -> Transaction:
        """Escrow the price and deposit and charge the buyer-side fee."""
        self._require_state(txn, TxnState.DRAFT)
        terms = txn.terms
        buyer_account = self.account_for(txn.buyer)
        required = terms.price + terms.buyer_deposit + terms.buyer_fee
        if self.ledger.balance_of(buyer_account) < required:
            raise InsufficientFunds(
                f"buyer {txn.buyer} needs {required}, holds "
                f"{self.ledger.balance_of(buyer_account)}"
            )
        self.ledger.post_entry(
            buyer_account, txn.escrow_account, terms.price, Reason.POST_PRICE, txn.id
        )
        self.ledger.post_entry(
            buyer_account, txn.escrow_account, terms.buyer_deposit, Reason.POST_DEPOSIT, txn.id
        )
        if terms.buyer_fee > 0:
            self.ledger.post_entry(
                buyer_account, self.fee_account, terms.buyer_fee, Reason.FEE_BUYER, txn.id
            )
        txn.state = TxnState.POSTED
        return txn

    def accept_question(self, txn: Transaction, seller: str, now: int) -> Transaction:
        """Seller commits by staking; acceptance and staking are simultaneous."""
        self._require_state(txn, TxnState.POSTED)
        if now > txn.terms.answer_deadline:
            raise DeadlinePassed(
                f"answer deadline {txn.terms.answer_deadline} passed at {now}"
            )
        if seller == txn.buyer:
            raise SelfDealing("buyer may not accept their own question")
        seller_account = self.account_for(seller)
        required = txn.terms.seller_stake + txn.terms.seller_fee
        if self.ledger.balance_of(seller_account) < required:
            raise InsufficientFunds(
                f"seller {seller} needs {required}, holds "
                f"{self.ledger.balance_of(seller_account)}"
            )
        self.ledger.post_entry(
            seller_account, txn.escrow_account, txn.terms.seller_stake, Reason.STAKE, txn.id
        )
        if txn.terms.seller_fee > 0:
            self.ledger.post_entry(
                seller_account, self.fee_account, txn.terms.seller_fee, Reason.FEE_SELLER, txn.id
            )
        txn.seller = seller
        txn.state = TxnState.ACCEPTED
        return txn

    def submit_answer(self, txn: Transaction, caller: str, raw: str, now: int) -> Transaction:
        """Store an in-set answer; an outside-set answer forfeits on settlement."""
        self._require_state(txn, TxnState.ACCEPTED)
        if now > txn.terms.answer_deadline:
            raise DeadlinePassed(
                f"answer deadline {txn.terms.answer_deadline} passed at {now}"
            )
        if caller != txn.seller:
            raise NotSeller(f"{caller!r} is not the recorded seller")
        value, membership = evaluate_answer(txn.spec, raw)
        if membership is Membership.IN_SET:
            txn.answer = value
            txn.state = TxnState.ANSWERED
        else:
            txn.state = TxnState.ANSWER_REJECTED
        return txn

    def submit_evidence(self, txn: Transaction, caller: str, body: bytes, now: int) -> Transaction:
        self._require_state(txn, TxnState.ANSWERED)
        if now > txn.terms.evidence_deadline:
            raise DeadlinePassed(
                f"evidence deadline {txn.terms.evidence_deadline} passed at {now}"
            )
        if caller != txn.buyer:
            raise NotBuyer(f"{caller!r} is not the buyer")
        txn.evidence = EvidenceRecord.create(bytes(body), submitted_at=now)
        txn.state = TxnState.EVIDENCE_SUBMITTED
        return txn

    def adjudicate(self, txn: Transaction, verdict: Verdict) -> Transaction:
        self._require_state(txn, TxnState.EVIDENCE_SUBMITTED)
        txn.verdict = Verdict(verdict)
        txn.state = TxnState.ADJUDICATED
        return txn

    def settle(self, txn: Transaction) -> Transaction:
        """Post the payout-table row for the terminal path and empty the escrow."""
        if txn.state not in SETTLEABLE_STATES:
            raise WrongState(f"cannot settle from {txn.state.value}")
        escrow_balance = self.ledger.balance_of(txn.escrow_account)
        expected = expected_escrow(txn.state, txn.terms)
        if escrow_balance != expected:
            raise EscrowMismatch(
                f"escrow holds {escrow_balance}, payout table expects {expected}"
            )
        role_accounts = {
            "escrow": txn.escrow_account,
            "exchange_fee": self.fee_account,
            "sink": self.sink_account,
            "buyer": self.account_for(txn.buyer),
        }
        if txn.seller is not None:
            role_accounts["seller"] = self.account_for(txn.seller)
        for row in payout_rows(txn.state, txn.verdict, txn.terms):
            self.ledger.post_entry(
                role_accounts[row.source],
                role_accounts[row.destination],
                row.amount,
                row.reason,
                txn.id,
            )
        assert self.ledger.balance_of(txn.escrow_account) == 0
        txn.settled_from = txn.state
        txn.state = TxnState.SETTLED
        return txn

    def advance_time(self, txn: Transaction, now: int) -> Transaction:
        """Expire a transaction whose inclusive deadline has passed; idempotent."""
        if txn.state is TxnState.POSTED and now > txn.terms.answer_deadline:
            txn.state = TxnState.EXPIRED_UNACCEPTED
        elif txn.state is TxnState.ACCEPTED and now > txn.terms.answer_deadline:
            txn.state = TxnState.EXPIRED_UNANSWERED
        elif txn.state is TxnState.ANSWERED and now > txn.terms.evidence_deadline:
            txn.state = TxnState.EXPIRED_UNVERIFIED
        return txn

    # -- helpers ---------------------------------------------------------

    def peek_next_txn_id(self) -> str:
        return f"txn-{self._txn_counter + 1:04d}"

    def get(self, txn_id: str) -> Transaction:
        try:
            return self.transactions[txn_id]
        except KeyError:
            raise UnknownTransaction(txn_id) from None

    def _require_state(self, txn: Transaction, state: TxnState) -> None:
        if txn.state is not state:
            raise WrongState(f"expected {state.value}, transaction is {txn.state.value}")


def transaction_to_dict(txn: Transaction) -> dict:
    """Full JSON mirror of a transaction, state as a string tag."""
    from .answerspec import spec_to_dict

    return {
        "id": txn.id,
        "buyer": txn.buyer,
        "seller": txn.seller,
        "question_text": txn.question_text,
        "spec": spec_to_dict(txn.spec),
        "terms": txn.terms.to_dict(),
        "state": txn.state.value,
        "answer": None
        if txn.answer is None
        else {"raw": txn.answer.raw, "canonical": txn.answer.canonical},
        "evidence": None
        if txn.evidence is None
        else {
            "digest": txn.evidence.digest,
            "submitted_at": txn.evidence.submitted_at,
        },
        "verdict": None if txn.verdict is None else txn.verdict.value,
        "settled_from": None if txn.settled_from is None else txn.settled_from.value,
        "escrow_account": txn.escrow_account.id,
    }
