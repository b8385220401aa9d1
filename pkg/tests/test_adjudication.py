"""Verdict production: mechanical attestation checks and manual rulings."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infomarket.adjudication import (
    AttestationSchema,
    AutoAttestation,
    DecisionStore,
    EmptyRationale,
    ManualRuling,
    NotArbiter,
    auto_verdict,
    manual_verdict,
    policy_from_dict,
    policy_to_dict,
)
from infomarket.answerspec import EnumeratedSpec, canonicalize
from infomarket.protocol import EvidenceRecord, Verdict, WrongState

from helpers import BINDING_SPEC, attestation, run_terminal_path

SPEC = EnumeratedSpec(("compound-17", "none"))
ANSWER = canonicalize(SPEC, "compound-17")


def evidence_of(body: bytes, at: int = 50) -> EvidenceRecord:
    return EvidenceRecord.create(body, submitted_at=at)


def test_matching_attestation_is_correct():
    decision = auto_verdict(SPEC, ANSWER, evidence_of(attestation("compound-17")))
    assert decision.verdict is Verdict.CORRECT
    assert decision.policy_used == "auto_attestation"


def test_contradicting_attestation_is_incorrect():
    decision = auto_verdict(SPEC, ANSWER, evidence_of(attestation("none")))
    assert decision.verdict is Verdict.INCORRECT


def test_corrupt_bytes_are_insufficient():
    decision = auto_verdict(SPEC, ANSWER, evidence_of(b"corrupt-bytes"))
    assert decision.verdict is Verdict.INSUFFICIENT_EVIDENCE


@pytest.mark.parametrize(
    "body",
    [
        b"[]",
        b"42",
        b'"just a string"',
        b'{"claimed_outcome": "compound-17"}',  # note missing
        b'{"supporting_note": "x"}',
        b'{"claimed_outcome": 17, "supporting_note": "x"}',
        b'{"claimed_outcome": "martian-rock", "supporting_note": "x"}',  # outside set
        b"\xff\xfe\x00",
    ],
)
def test_malformed_or_outside_set_attestations_are_insufficient(body):
    decision = auto_verdict(SPEC, ANSWER, evidence_of(body))
    assert decision.verdict is Verdict.INSUFFICIENT_EVIDENCE


def test_attestation_outcome_is_canonicalized_like_an_answer():
    body = json.dumps(
        {"claimed_outcome": "  COMPOUND-17 ", "supporting_note": "case-folded"}
    ).encode()
    decision = auto_verdict(SPEC, ANSWER, evidence_of(body))
    assert decision.verdict is Verdict.CORRECT


def test_auto_verdict_is_deterministic():
    evidence = evidence_of(attestation("none"), at=123)
    decisions = {auto_verdict(SPEC, ANSWER, evidence) for _ in range(5)}
    assert len(decisions) == 1
    assert decisions.pop().decided_at == 123


@settings(max_examples=300, deadline=None)
@given(body=st.binary(max_size=60))
def test_every_evidence_bytestring_yields_a_verdict(body):
    decision = auto_verdict(SPEC, ANSWER, evidence_of(body))
    assert decision.verdict in (
        Verdict.CORRECT,
        Verdict.INCORRECT,
        Verdict.INSUFFICIENT_EVIDENCE,
    )


# -- manual rulings -----------------------------------------------------------

def _evidence_submitted_txn():
    from infomarket.ledger import AccountKind, Ledger
    from infomarket.protocol import Exchange

    from helpers import STANDARD_TERMS

    ledger = Ledger()
    exchange = Exchange(ledger)
    buyer = exchange.register_party("qbuyer", AccountKind.BUYER)
    seller = exchange.register_party("aseller", AccountKind.SELLER)
    ledger.fund(buyer, 245000)
    ledger.fund(seller, 105000)
    txn = exchange.create_question("qbuyer", "q", BINDING_SPEC, STANDARD_TERMS)
    exchange.post_question(txn)
    exchange.accept_question(txn, "aseller", now=0)
    exchange.submit_answer(txn, "aseller", "compound-17", now=0)
    exchange.submit_evidence(txn, "qbuyer", attestation("compound-17"), now=5)
    return exchange, txn


def test_authorized_arbiter_rules():
    exchange, txn = _evidence_submitted_txn()
    policy = ManualRuling(arbiter="judge-1")
    decision = manual_verdict(
        "judge-1", txn, Verdict.CORRECT, "evidence shows binding", policy, now=7
    )
    assert decision.verdict is Verdict.CORRECT
    assert decision.policy_used == "manual_ruling"
    assert decision.decided_at == 7


def test_unauthorized_party_cannot_rule():
    exchange, txn = _evidence_submitted_txn()
    policy = ManualRuling(arbiter="judge-1")
    with pytest.raises(NotArbiter):
        manual_verdict("impostor", txn, Verdict.CORRECT, "looks fine", policy, now=7)


def test_ruling_requires_rationale():
    exchange, txn = _evidence_submitted_txn()
    policy = ManualRuling(arbiter="judge-1")
    with pytest.raises(EmptyRationale):
        manual_verdict("judge-1", txn, Verdict.CORRECT, "   ", policy, now=7)


def test_ruling_requires_evidence_submitted_state():
    exchange, txn = _evidence_submitted_txn()
    exchange.adjudicate(txn, Verdict.CORRECT)
    policy = ManualRuling(arbiter="judge-1")
    with pytest.raises(WrongState):
        manual_verdict("judge-1", txn, Verdict.INCORRECT, "second thoughts", policy, now=9)


def test_decisions_are_append_once():
    exchange, txn = _evidence_submitted_txn()
    store = DecisionStore()
    policy = ManualRuling(arbiter="judge-1")
    decision = manual_verdict("judge-1", txn, Verdict.CORRECT, "ok", policy, now=7)
    store.record(txn.id, decision)
    with pytest.raises(WrongState):
        store.record(txn.id, decision)
    assert store.get(txn.id) is decision


# -- the arbiter cannot profit from its ruling ---------------------------------

def test_exchange_revenue_is_invariant_under_verdict_permutation():
    fee_deltas = set()
    for path in ("correct", "incorrect", "insufficient"):
        result = run_terminal_path(path)
        fee_deltas.add(result.ledger.balance_of("exchange_fee"))
    assert fee_deltas == {10000}


def test_policy_round_trip():
    for policy in (
        AutoAttestation(),
        AutoAttestation(AttestationSchema(outcome_field="claim", note_field="why")),
        ManualRuling(arbiter="judge-9"),
    ):
        assert policy_from_dict(policy_to_dict(policy)) == policy
