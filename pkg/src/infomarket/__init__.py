"""Escrow-brokered question/answer market.

A buyer pays a fixed price for an answer drawn from a set they fix in
advance, a seller stakes money on being right, and a neutral exchange holds
everything in escrow and settles by an outcome-contingent payout table. The
seller profits only if the answer proves correct; the buyer's outlay does
not depend on the outcome; the exchange fee never does.
"""

from .answerspec import (
    AnswerSpec,
    AnswerValue,
    DecimalRangeSpec,
    EnumeratedSpec,
    IntegerRangeSpec,
    Membership,
    canonicalize,
    check_membership,
    evaluate_answer,
    validate_spec,
)
from .ledger import AccountId, AccountKind, Ledger, LedgerEntry, Reason, replay_balances
from .protocol import (
    EvidenceRecord,
    Exchange,
    Terms,
    Transaction,
    TxnState,
    Verdict,
    expected_escrow,
    payout_rows,
)
from .adjudication import (
    AttestationSchema,
    AutoAttestation,
    Decision,
    DecisionStore,
    ManualRuling,
    auto_verdict,
    manual_verdict,
)
from .service import ExchangeService, PartyRegistration, ServiceConfig
from .simulation import (
    BuyerStrategy,
    SellerStrategy,
    SimConfig,
    SimReport,
    break_even_accuracy,
    buyer_should_verify,
    run_simulation,
    seller_expected_payoff,
)

__all__ = [
    "AccountId",
    "AccountKind",
    "AnswerSpec",
    "AnswerValue",
    "AttestationSchema",
    "AutoAttestation",
    "BuyerStrategy",
    "Decision",
    "DecisionStore",
    "DecimalRangeSpec",
    "EnumeratedSpec",
    "EvidenceRecord",
    "Exchange",
    "ExchangeService",
    "IntegerRangeSpec",
    "Ledger",
    "LedgerEntry",
    "ManualRuling",
    "Membership",
    "PartyRegistration",
    "Reason",
    "SellerStrategy",
    "ServiceConfig",
    "SimConfig",
    "SimReport",
    "Terms",
    "Transaction",
    "TxnState",
    "Verdict",
    "auto_verdict",
    "break_even_accuracy",
    "buyer_should_verify",
    "canonicalize",
    "check_membership",
    "evaluate_answer",
    "expected_escrow",
    "manual_verdict",
    "payout_rows",
    "replay_balances",
    "run_simulation",
    "seller_expected_payoff",
    "validate_spec",
]

__version__ = "0.1.0"
