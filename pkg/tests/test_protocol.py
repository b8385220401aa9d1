"""Lifecycle and settlement tests against frozen payout expectations."""

import pytest

from infomarket.answerspec import InvalidSpec
from infomarket.ledger import AccountKind, InsufficientFunds, Ledger, Reason
from infomarket.protocol import (
    DeadlinePassed,
    EscrowMismatch,
    Exchange,
    InvalidTerms,
    NotBuyer,
    NotSeller,
    SelfDealing,
    Terms,
    TxnState,
    Verdict,
    WrongState,
    expected_escrow,
    payout_rows,
)

from helpers import (
    BINDING_SPEC,
    STANDARD_TERMS,
    TERMINAL_PATHS,
    attestation,
    fold_journal,
    journal_issuance,
    run_terminal_path,
)


def make_exchange(buyer_balance=245000, seller_balance=105000):
    ledger = Ledger()
    exchange = Exchange(ledger)
    buyer = exchange.register_party("qbuyer", AccountKind.BUYER)
    seller = exchange.register_party("aseller", AccountKind.SELLER)
    if buyer_balance:
        ledger.fund(buyer, buyer_balance)
    if seller_balance:
        ledger.fund(seller, seller_balance)
    return ledger, exchange, buyer, seller


# -- create / terms -------------------------------------------------------------

def test_create_question_drafts_without_moving_money():
    ledger, exchange, buyer, _ = make_exchange()
    txn = exchange.create_question("qbuyer", "what binds?", BINDING_SPEC, STANDARD_TERMS)
    assert txn.state is TxnState.DRAFT
    assert txn.seller is None
    assert ledger.balance_of(buyer) == 245000
    assert ledger.balance_of(txn.escrow_account) == 0


def test_terms_require_positive_deposit():
    with pytest.raises(InvalidTerms):
        Terms(price=200000, seller_stake=100000, buyer_deposit=0,
              buyer_fee=5000, seller_fee=5000, answer_deadline=100, evidence_deadline=200)


def test_terms_require_deadline_ordering():
    with pytest.raises(InvalidTerms):
        Terms(price=200000, seller_stake=100000, buyer_deposit=40000,
              buyer_fee=5000, seller_fee=5000, answer_deadline=200, evidence_deadline=100)
    with pytest.raises(InvalidTerms):
        Terms(price=200000, seller_stake=100000, buyer_deposit=40000,
              buyer_fee=5000, seller_fee=5000, answer_deadline=200, evidence_deadline=200)


def test_create_question_rejects_invalid_spec():
    _, exchange, _, _ = make_exchange()
    from infomarket.answerspec import EnumeratedSpec

    with pytest.raises(InvalidSpec):
        exchange.create_question("qbuyer", "q", EnumeratedSpec(("only",)), STANDARD_TERMS)


# -- post -----------------------------------------------------------------------

def test_post_question_escrows_price_and_deposit():
    ledger, exchange, buyer, _ = make_exchange(buyer_balance=245000)
    txn = exchange.create_question("qbuyer", "q", BINDING_SPEC, STANDARD_TERMS)
    exchange.post_question(txn)
    assert txn.state is TxnState.POSTED
    assert ledger.balance_of(txn.escrow_account) == 240000
    assert ledger.balance_of(exchange.fee_account) == 5000
    assert ledger.balance_of(buyer) == 0


def test_post_question_rejection_is_atomic():
    ledger, exchange, buyer, _ = make_exchange(buyer_balance=244999)
    txn = exchange.create_question("qbuyer", "q", BINDING_SPEC, STANDARD_TERMS)
    entries_before = len(ledger.entries)
    with pytest.raises(InsufficientFunds):
        exchange.post_question(txn)
    assert txn.state is TxnState.DRAFT
    assert len(ledger.entries) == entries_before
    assert ledger.balance_of(buyer) == 244999


def test_double_post_is_wrong_state():
    _, exchange, _, _ = make_exchange()
    txn = exchange.create_question("qbuyer", "q", BINDING_SPEC, STANDARD_TERMS)
    exchange.post_question(txn)
    with pytest.raises(WrongState):
        exchange.post_question(txn)


# -- accept ------------------------------------------------------------------------

def test_accept_stakes_and_charges_fee():
    ledger, exchange, _, seller = make_exchange()
    txn = exchange.create_question("qbuyer", "q", BINDING_SPEC, STANDARD_TERMS)
    exchange.post_question(txn)
    exchange.accept_question(txn, "aseller", now=0)
    assert txn.state is TxnState.ACCEPTED
    assert txn.seller == "aseller"
    assert ledger.balance_of(txn.escrow_account) == 340000
    assert ledger.balance_of(exchange.fee_account) == 10000
    assert ledger.balance_of(seller) == 0


def test_buyer_cannot_accept_own_question():
    _, exchange, _, _ = make_exchange()
    txn = exchange.create_question("qbuyer", "q", BINDING_SPEC, STANDARD_TERMS)
    exchange.post_question(txn)
    with pytest.raises(SelfDealing):
        exchange.accept_question(txn, "qbuyer", now=0)


def test_accept_deadline_is_inclusive():
    _, exchange, _, _ = make_exchange()
    txn = exchange.create_question("qbuyer", "q", BINDING_SPEC, STANDARD_TERMS)
    exchange.post_question(txn)
    exchange.accept_question(txn, "aseller", now=STANDARD_TERMS.answer_deadline)
    assert txn.state is TxnState.ACCEPTED


def test_accept_after_deadline_rejected():
    _, exchange, _, _ = make_exchange()
    txn = exchange.create_question("qbuyer", "q", BINDING_SPEC, STANDARD_TERMS)
    exchange.post_question(txn)
    with pytest.raises(DeadlinePassed):
        exchange.accept_question(txn, "aseller", now=STANDARD_TERMS.answer_deadline + 1)


# -- answer -------------------------------------------------------------------------

def _accepted_txn():
    ledger, exchange, buyer, seller = make_exchange()
    txn = exchange.create_question("qbuyer", "q", BINDING_SPEC, STANDARD_TERMS)
    exchange.post_question(txn)
    exchange.accept_question(txn, "aseller", now=0)
    return ledger, exchange, txn


def test_in_set_answer_accepted():
    _, exchange, txn = _accepted_txn()
    exchange.submit_answer(txn, "aseller", "compound-17", now=0)
    assert txn.state is TxnState.ANSWERED
    assert txn.answer.canonical == "compound-17"


def test_outside_set_answer_rejected_and_stake_forfeited():
    ledger, exchange, txn = _accepted_txn()
    exchange.submit_answer(txn, "aseller", "compound-99", now=0)
    assert txn.state is TxnState.ANSWER_REJECTED
    assert txn.answer is None
    exchange.settle(txn)
    assert ledger.balance_of(exchange.sink_account) == 100000
    assert ledger.balance_of(exchange.account_for("qbuyer")) == 240000


def test_answer_after_deadline_rejected():
    _, exchange, txn = _accepted_txn()
    with pytest.raises(DeadlinePassed):
        exchange.submit_answer(txn, "aseller", "compound-17",
                               now=STANDARD_TERMS.answer_deadline + 1)


def test_only_the_seller_may_answer():
    _, exchange, txn = _accepted_txn()
    with pytest.raises(NotSeller):
        exchange.submit_answer(txn, "qbuyer", "compound-17", now=0)


# -- evidence --------------------------------------------------------------------------

def _answered_txn():
    ledger, exchange, txn = _accepted_txn()
    exchange.submit_answer(txn, "aseller", "compound-17", now=0)
    return ledger, exchange, txn


def test_evidence_deadline_is_inclusive():
    _, exchange, txn = _answered_txn()
    exchange.submit_evidence(txn, "qbuyer", b"{}", now=STANDARD_TERMS.evidence_deadline)
    assert txn.state is TxnState.EVIDENCE_SUBMITTED


def test_evidence_after_deadline_rejected():
    _, exchange, txn = _answered_txn()
    with pytest.raises(DeadlinePassed):
        exchange.submit_evidence(txn, "qbuyer", b"{}",
                                 now=STANDARD_TERMS.evidence_deadline + 1)


def test_evidence_digest_round_trips():
    import hashlib

    _, exchange, txn = _answered_txn()
    body = attestation("compound-17")
    exchange.submit_evidence(txn, "qbuyer", body, now=10)
    assert txn.evidence.digest == hashlib.sha256(body).hexdigest()
    assert hashlib.sha256(txn.evidence.body).hexdigest() == txn.evidence.digest
    assert txn.evidence.submitted_at == 10


def test_only_the_buyer_may_submit_evidence():
    _, exchange, txn = _answered_txn()
    with pytest.raises(NotBuyer):
        exchange.submit_evidence(txn, "aseller", b"{}", now=10)


# -- adjudicate --------------------------------------------------------------------------

def test_adjudicate_requires_evidence():
    _, exchange, txn = _answered_txn()
    with pytest.raises(WrongState):
        exchange.adjudicate(txn, Verdict.CORRECT)


def test_adjudicate_stores_verdict():
    _, exchange, txn = _answered_txn()
    exchange.submit_evidence(txn, "qbuyer", b"{}", now=10)
    exchange.adjudicate(txn, Verdict.INCORRECT)
    assert txn.state is TxnState.ADJUDICATED
    assert txn.verdict is Verdict.INCORRECT


# -- settle: the payout table -----------------------------------------------------------

# Frozen expectations per terminal path with the standard terms. Balances
# derived by hand from the settlement table; the oracle below re-derives
# them by folding the exported journal text.
PATH_EXPECTATIONS = {
    #  path          buyer   seller   fees   sink
    "correct":      (40000,  300000, 10000,      0),
    "incorrect":    (40000,       0, 10000, 300000),
    "insufficient": (    0,  300000, 10000,  40000),
    "rejected":     (240000,      0, 10000, 100000),
    "unanswered":   (240000,      0, 10000, 100000),
    "unverified":   (    0,  300000, 10000,  40000),
    "unaccepted":   (245000, 105000,     0,      0),
}

SETTLE_REASONS = {
    "correct": [("PAYOUT_PRICE", 200000), ("RETURN_STAKE", 100000), ("RETURN_DEPOSIT", 40000)],
    "incorrect": [("SINK_PRICE", 200000), ("FORFEIT_STAKE", 100000), ("RETURN_DEPOSIT", 40000)],
    "insufficient": [("PAYOUT_PRICE", 200000), ("RETURN_STAKE", 100000), ("FORFEIT_DEPOSIT", 40000)],
    "rejected": [("FORFEIT_STAKE", 100000), ("REFUND", 200000), ("RETURN_DEPOSIT", 40000)],
    "unanswered": [("FORFEIT_STAKE", 100000), ("REFUND", 200000), ("RETURN_DEPOSIT", 40000)],
    "unverified": [("PAYOUT_PRICE", 200000), ("RETURN_STAKE", 100000), ("FORFEIT_DEPOSIT", 40000)],
    "unaccepted": [("REFUND", 200000), ("RETURN_DEPOSIT", 40000), ("REFUND", 5000)],
}


@pytest.mark.parametrize("path", TERMINAL_PATHS)
def test_settlement_matches_frozen_payout_table(path):
    result = run_terminal_path(path)
    buyer_final, seller_final, fee_final, sink_final = PATH_EXPECTATIONS[path]
    assert result.ledger.balance_of(result.buyer_account) == buyer_final
    assert result.ledger.balance_of(result.seller_account) == seller_final
    assert result.ledger.balance_of("exchange_fee") == fee_final
    assert result.ledger.balance_of(result.txn.escrow_account) == 0
    assert result.ledger.balance_of("sink") == sink_final
    # total supply is untouched by the whole lifecycle
    assert result.ledger.total_supply() == result.buyer_funded + result.seller_funded


@pytest.mark.parametrize("path", TERMINAL_PATHS)
def test_settlement_entries_carry_expected_reasons(path):
    result = run_terminal_path(path)
    settle_entries = [
        (e.reason, e.amount)
        for e in result.ledger.entries
        if e.txn == result.txn.id
        and e.reason not in ("POST_PRICE", "POST_DEPOSIT", "STAKE", "FEE_BUYER", "FEE_SELLER")
    ]
    assert settle_entries == SETTLE_REASONS[path]


@pytest.mark.parametrize("path", TERMINAL_PATHS)
def test_journal_fold_oracle_agrees(path):
    result = run_terminal_path(path)
    journal = result.ledger.export_journal()
    oracle = fold_journal(journal)
    for account, balance in result.ledger.balances().items():
        assert oracle.get(account, 0) == balance
    assert sum(oracle.values()) == journal_issuance(journal)


@pytest.mark.parametrize("path", TERMINAL_PATHS)
def test_sink_is_never_debited(path):
    result = run_terminal_path(path)
    assert all(entry.debit != "sink" for entry in result.ledger.entries)


def test_buyer_payment_invariance_between_verdicts():
    correct = run_terminal_path("correct")
    incorrect = run_terminal_path("incorrect")
    outflow_correct = correct.buyer_funded - correct.ledger.balance_of(correct.buyer_account)
    outflow_incorrect = incorrect.buyer_funded - incorrect.ledger.balance_of(
        incorrect.buyer_account
    )
    assert outflow_correct == outflow_incorrect == 205000  # price + buyer fee


def test_seller_payoff_signs():
    for path, expected in [
        ("correct", 195000),
        ("incorrect", -105000),
        ("rejected", -105000),
        ("unanswered", -105000),
        ("unverified", 195000),
        ("insufficient", 195000),
    ]:
        result = run_terminal_path(path)
        assert result.net(result.seller_account) == expected, path


def test_settle_requires_settleable_state():
    _, exchange, txn = _answered_txn()
    with pytest.raises(WrongState):
        exchange.settle(txn)


def test_settle_detects_corrupted_escrow():
    ledger, exchange, txn = _answered_txn()
    exchange.submit_evidence(txn, "qbuyer", b"{}", now=10)
    exchange.adjudicate(txn, Verdict.CORRECT)
    # drain one cent out of escrow behind the protocol's back
    ledger.post_entry(txn.escrow_account, exchange.sink_account, 1, Reason.REFUND)
    with pytest.raises(EscrowMismatch):
        exchange.settle(txn)


def test_double_settle_is_wrong_state():
    result = run_terminal_path("correct")
    with pytest.raises(WrongState):
        result.exchange.settle(result.txn)


# -- advance_time ----------------------------------------------------------------------

def test_advance_time_boundary_is_inclusive():
    _, exchange, _, _ = make_exchange()
    txn = exchange.create_question("qbuyer", "q", BINDING_SPEC, STANDARD_TERMS)
    exchange.post_question(txn)
    exchange.advance_time(txn, STANDARD_TERMS.answer_deadline)
    assert txn.state is TxnState.POSTED
    exchange.advance_time(txn, STANDARD_TERMS.answer_deadline + 1)
    assert txn.state is TxnState.EXPIRED_UNACCEPTED


def test_advance_time_is_idempotent():
    _, exchange, txn = _accepted_txn()
    exchange.advance_time(txn, STANDARD_TERMS.answer_deadline + 1)
    first = txn.state
    exchange.advance_time(txn, STANDARD_TERMS.answer_deadline + 1)
    assert txn.state is first is TxnState.EXPIRED_UNANSWERED


def test_advance_time_expires_answered_to_unverified():
    _, exchange, txn = _answered_txn()
    exchange.advance_time(txn, STANDARD_TERMS.evidence_deadline + 1)
    assert txn.state is TxnState.EXPIRED_UNVERIFIED


def test_advance_time_leaves_other_states_alone():
    _, exchange, txn = _answered_txn()
    exchange.submit_evidence(txn, "qbuyer", b"{}", now=0)
    exchange.advance_time(txn, 10**9)
    assert txn.state is TxnState.EVIDENCE_SUBMITTED


# -- state machine exhaustiveness ----------------------------------------------------------

ALL_STATES = list(TxnState)

OPERATIONS = ("post", "accept", "answer", "evidence", "adjudicate", "settle")

DEFINED_EDGES = {
    ("post", TxnState.DRAFT),
    ("accept", TxnState.POSTED),
    ("answer", TxnState.ACCEPTED),
    ("evidence", TxnState.ANSWERED),
    ("adjudicate", TxnState.EVIDENCE_SUBMITTED),
    ("settle", TxnState.ADJUDICATED),
    ("settle", TxnState.ANSWER_REJECTED),
    ("settle", TxnState.EXPIRED_UNANSWERED),
    ("settle", TxnState.EXPIRED_UNVERIFIED),
    ("settle", TxnState.EXPIRED_UNACCEPTED),
}


def drive_to_state(state: TxnState):
    """Fresh exchange with one transaction parked in the requested state."""
    ledger, exchange, buyer, seller = make_exchange()
    txn = exchange.create_question("qbuyer", "q", BINDING_SPEC, STANDARD_TERMS)
    if state is TxnState.DRAFT:
        return exchange, txn
    exchange.post_question(txn)
    if state is TxnState.POSTED:
        return exchange, txn
    if state is TxnState.EXPIRED_UNACCEPTED:
        exchange.advance_time(txn, STANDARD_TERMS.answer_deadline + 1)
        return exchange, txn
    exchange.accept_question(txn, "aseller", now=0)
    if state is TxnState.ACCEPTED:
        return exchange, txn
    if state is TxnState.EXPIRED_UNANSWERED:
        exchange.advance_time(txn, STANDARD_TERMS.answer_deadline + 1)
        return exchange, txn
    if state is TxnState.ANSWER_REJECTED:
        exchange.submit_answer(txn, "aseller", "compound-99", now=0)
        return exchange, txn
    exchange.submit_answer(txn, "aseller", "compound-17", now=0)
    if state is TxnState.ANSWERED:
        return exchange, txn
    if state is TxnState.EXPIRED_UNVERIFIED:
        exchange.advance_time(txn, STANDARD_TERMS.evidence_deadline + 1)
        return exchange, txn
    exchange.submit_evidence(txn, "qbuyer", attestation("compound-17"), now=0)
    if state is TxnState.EVIDENCE_SUBMITTED:
        return exchange, txn
    exchange.adjudicate(txn, Verdict.CORRECT)
    if state is TxnState.ADJUDICATED:
        return exchange, txn
    exchange.settle(txn)
    assert state is TxnState.SETTLED
    return exchange, txn


def apply_operation(exchange, txn, op):
    if op == "post":
        exchange.post_question(txn)
    elif op == "accept":
        exchange.accept_question(txn, "aseller", now=0)
    elif op == "answer":
        exchange.submit_answer(txn, txn.seller or "aseller", "compound-17", now=0)
    elif op == "evidence":
        exchange.submit_evidence(txn, "qbuyer", b"{}", now=0)
    elif op == "adjudicate":
        exchange.adjudicate(txn, Verdict.CORRECT)
    elif op == "settle":
        exchange.settle(txn)


def test_every_state_operation_pair_is_edge_or_wrong_state():
    checked = 0
    for state in ALL_STATES:
        for op in OPERATIONS:
            exchange, txn = drive_to_state(state)
            assert txn.state is state
            supply_before = exchange.ledger.total_supply()
            if (op, state) in DEFINED_EDGES:
                apply_operation(exchange, txn, op)
                assert txn.state is not state or state is TxnState.DRAFT
            else:
                with pytest.raises(WrongState):
                    apply_operation(exchange, txn, op)
                assert txn.state is state
            assert exchange.ledger.total_supply() == supply_before
            checked += 1
    assert checked == len(ALL_STATES) * len(OPERATIONS)


def test_every_lifecycle_reaches_terminal_under_advancing_time():
    # From any post-draft state: advance far, adjudicate if evidence is in,
    # settle; everything lands in Settled.
    for state in ALL_STATES:
        if state in (TxnState.DRAFT, TxnState.SETTLED):
            continue
        exchange, txn = drive_to_state(state)
        exchange.advance_time(txn, STANDARD_TERMS.evidence_deadline + 10)
        if txn.state is TxnState.EVIDENCE_SUBMITTED:
            exchange.adjudicate(txn, Verdict.CORRECT)
        exchange.settle(txn)
        assert txn.state is TxnState.SETTLED, state


# -- payout preview helpers -------------------------------------------------------------

def test_expected_escrow_matches_payout_totals():
    for state in (TxnState.ANSWER_REJECTED, TxnState.EXPIRED_UNANSWERED,
                  TxnState.EXPIRED_UNVERIFIED):
        rows = payout_rows(state, None, STANDARD_TERMS)
        from_escrow = sum(r.amount for r in rows if r.source == "escrow")
        assert from_escrow == expected_escrow(state, STANDARD_TERMS)
    for verdict in Verdict:
        rows = payout_rows(TxnState.ADJUDICATED, verdict, STANDARD_TERMS)
        from_escrow = sum(r.amount for r in rows if r.source == "escrow")
        assert from_escrow == expected_escrow(TxnState.ADJUDICATED, STANDARD_TERMS)
    rows = payout_rows(TxnState.EXPIRED_UNACCEPTED, None, STANDARD_TERMS)
    from_escrow = sum(r.amount for r in rows if r.source == "escrow")
    assert from_escrow == expected_escrow(TxnState.EXPIRED_UNACCEPTED, STANDARD_TERMS)
