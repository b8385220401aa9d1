"""Monte-Carlo verification of the market's incentive structure.

Every trial runs the complete protocol lifecycle (fund, post, accept,
answer, evidence, adjudicate, settle) against a fresh ledger, with the
answer's correctness drawn Bernoulli(p). No shortcut formulas: payoffs are
read off final balances, so these estimates test the settlement code
itself. The closed forms they must converge to:

    seller expected payoff  E(p) = p*price - (1-p)*stake - seller_fee
    break-even accuracy     p*   = (stake + seller_fee) / (price + stake)

A seller is rewarded above p* and penalized below it; a buyer verifies
exactly when producing evidence costs less than the refundable deposit.
"""

from __future__ import annotations

import json
import multiprocessing
import os
from dataclasses import dataclass
from fractions import Fraction
from math import sqrt
from typing import Optional, Sequence, Union

import numpy as np

from .adjudication import auto_verdict
from .answerspec import EnumeratedSpec
from .ledger import AccountKind, Ledger
from .protocol import Exchange, Terms


class InvalidProbability(Exception):
    pass


class InvalidConfig(Exception):
    pass


ProbabilityLike = Union[int, float, str, Fraction]


def as_probability(p: ProbabilityLike) -> Fraction:
    """Exact rational probability; float input is read as its decimal literal."""
    if isinstance(p, Fraction):
        value = p
    elif isinstance(p, bool):
        raise InvalidProbability(f"not a probability: {p!r}")
    elif isinstance(p, int):
        value = Fraction(p)
    elif isinstance(p, float):
        value = Fraction(str(p))
    elif isinstance(p, str):
        value = Fraction(p)
    else:
        raise InvalidProbability(f"not a probability: {p!r}")
    if not 0 <= value <= 1:
        raise InvalidProbability(f"probability {p!r} outside [0, 1]")
    return value


def seller_expected_payoff(p: ProbabilityLike, terms: Terms) -> Fraction:
    """Exact expected seller payoff when the buyer verifies."""
    prob = as_probability(p)
    return (
        prob * terms.price
        - (1 - prob) * terms.seller_stake
        - terms.seller_fee
    )


def break_even_accuracy(terms: Terms) -> Fraction:
    """The accuracy at which selling stops losing money in expectation."""
    return Fraction(terms.seller_stake + terms.seller_fee, terms.price + terms.seller_stake)


@dataclass(frozen=True, slots=True)
class SellerStrategy:
    """Seller with a fixed chance of being right who participates only when
    participation has positive expected value."""

    accuracy: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "accuracy", as_probability(self.accuracy))

    def participates(self, terms: Terms) -> bool:
        return seller_expected_payoff(self.accuracy, terms) > 0


@dataclass(frozen=True, slots=True)
class BuyerStrategy:
    """Buyer whose out-of-band cost of producing evidence is ``evidence_cost``."""

    evidence_cost: int = 0

    def __post_init__(self) -> None:
        if self.evidence_cost < 0:
            raise InvalidConfig("evidence_cost must be >= 0")


def buyer_should_verify(strategy: BuyerStrategy, terms: Terms) -> bool:
    """Verify iff evidence costs strictly less than the refundable deposit.

    At exact indifference the buyer does not verify: real verification has
    effort beyond the modeled cost.
    """
    return strategy.evidence_cost < terms.buyer_deposit


@dataclass(frozen=True)
class SimConfig:
    terms: Terms
    grid: tuple[Fraction, ...]
    trials: int
    seed: int
    buyer: BuyerStrategy = BuyerStrategy()

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid", tuple(as_probability(p) for p in self.grid))
        if not self.grid:
            raise InvalidConfig("grid must contain at least one probability")
        if self.trials <= 0:
            raise InvalidConfig("trials must be positive")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise InvalidConfig("seed must be an integer")


# One reusable binary question; the claimed outcome in the attestation either
# matches the seller's answer or contradicts it, realizing the drawn verdict
# through the real adjudication path.
_SIM_SPEC = EnumeratedSpec(("yes", "no"))
_SIM_ANSWER = "yes"
_ATTEST_MATCH = json.dumps(
    {"claimed_outcome": "yes", "supporting_note": "outcome observed"}
).encode()
_ATTEST_CONTRADICT = json.dumps(
    {"claimed_outcome": "no", "supporting_note": "outcome observed"}
).encode()


@dataclass(slots=True)
class TrialOutcome:
    seller_net: int
    buyer_outflow: int
    exchange_revenue: int
    sink_absorbed: int
    issued: int
    final_total: int


def run_trial(terms: Terms, correct: bool, verify: bool) -> TrialOutcome:
    """One full lifecycle on a fresh ledger; returns exact integer deltas."""
    ledger = Ledger()
    exchange = Exchange(ledger)
    buyer_account = exchange.register_party("buyer", AccountKind.BUYER)
    seller_account = exchange.register_party("seller", AccountKind.SELLER)
    buyer_stake = terms.price + terms.buyer_deposit + terms.buyer_fee
    seller_stake = terms.seller_stake + terms.seller_fee
    ledger.fund(buyer_account, buyer_stake)
    ledger.fund(seller_account, seller_stake)

    txn = exchange.create_question("buyer", "simulated question", _SIM_SPEC, terms)
    exchange.post_question(txn)
    exchange.accept_question(txn, "seller", now=terms.answer_deadline)
    exchange.submit_answer(txn, "seller", _SIM_ANSWER, now=terms.answer_deadline)
    if verify:
        body = _ATTEST_MATCH if correct else _ATTEST_CONTRADICT
        exchange.submit_evidence(txn, "buyer", body, now=terms.evidence_deadline)
        decision = auto_verdict(txn.spec, txn.answer, txn.evidence)
        exchange.adjudicate(txn, decision.verdict)
    else:
        exchange.advance_time(txn, terms.evidence_deadline + 1)
    exchange.settle(txn)

    return TrialOutcome(
        seller_net=ledger.balance_of(seller_account) - seller_stake,
        buyer_outflow=buyer_stake - ledger.balance_of(buyer_account),
        exchange_revenue=ledger.balance_of(exchange.fee_account),
        sink_absorbed=ledger.balance_of(exchange.sink_account),
        issued=ledger.total_issued,
        final_total=ledger.total_supply(),
    )


@dataclass
class GridPointStats:
    p: Fraction
    trials: int
    seller_net_total: int
    seller_net_sumsq: int
    buyer_outflow_total: int
    sink_total: int
    exchange_revenue_per_txn: int
    would_participate: bool

    @property
    def seller_net_mean(self) -> float:
        return self.seller_net_total / self.trials

    @property
    def seller_net_stderr(self) -> float:
        if self.trials < 2:
            return 0.0
        variance = (
            self.seller_net_sumsq - self.seller_net_total**2 / self.trials
        ) / (self.trials - 1)
        return sqrt(max(variance, 0.0) / self.trials)

    def to_dict(self) -> dict:
        return {
            "p": float(self.p),
            "p_exact": str(self.p),
            "trials": self.trials,
            "seller_net_total": self.seller_net_total,
            "seller_net_mean": self.seller_net_mean,
            "seller_net_stderr": self.seller_net_stderr,
            "buyer_outflow_total": self.buyer_outflow_total,
            "buyer_outflow_mean": self.buyer_outflow_total / self.trials,
            "sink_total": self.sink_total,
            "sink_mean": self.sink_total / self.trials,
            "exchange_revenue_per_txn": self.exchange_revenue_per_txn,
            "would_participate": self.would_participate,
        }


@dataclass
class SimReport:
    terms: Terms
    grid: tuple[Fraction, ...]
    trials: int
    seed: int
    buyer_verifies: bool
    evidence_cost: int
    points: list[GridPointStats]
    issued_total: int
    final_balance_total: int

    @property
    def conserved(self) -> bool:
        return self.issued_total == self.final_balance_total

    @property
    def break_even_closed_form(self) -> Fraction:
        return break_even_accuracy(self.terms)

    @property
    def break_even_estimate(self) -> Optional[float]:
        return estimate_break_even(
            [(float(pt.p), pt.seller_net_mean) for pt in self.points]
        )

    def to_dict(self) -> dict:
        return {
            "config": {
                "terms": self.terms.to_dict(),
                "grid": [str(p) for p in self.grid],
                "trials": self.trials,
                "seed": self.seed,
                "buyer_verifies": self.buyer_verifies,
                "evidence_cost": self.evidence_cost,
            },
            "points": [pt.to_dict() for pt in self.points],
            "break_even": {
                "closed_form": str(self.break_even_closed_form),
                "closed_form_float": float(self.break_even_closed_form),
                "estimate": self.break_even_estimate,
            },
            "conservation": {
                "issued_total": self.issued_total,
                "final_balance_total": self.final_balance_total,
                "ok": self.conserved,
            },
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode(
            "utf-8"
        )


def _chunk_totals(args: tuple[Terms, "np.ndarray", bool]) -> tuple[int, int, int, int, int, int, int]:
    """Exact integer partial sums over one contiguous block of trials.

    Workers return plain integers; summing partials in block order gives the
    same totals as a sequential run, for any worker count.
    """
    terms, draws, verify = args
    seller_total = seller_sumsq = buyer_total = sink_total = 0
    issued = final = 0
    revenue = -1
    for correct in draws:
        outcome = run_trial(terms, bool(correct), verify)
        seller_total += outcome.seller_net
        seller_sumsq += outcome.seller_net**2
        buyer_total += outcome.buyer_outflow
        sink_total += outcome.sink_absorbed
        issued += outcome.issued
        final += outcome.final_total
        if revenue < 0:
            revenue = outcome.exchange_revenue
        elif revenue != outcome.exchange_revenue:
            raise AssertionError(
                f"exchange revenue varied across trials: {revenue} != {outcome.exchange_revenue}"
            )
    return seller_total, seller_sumsq, buyer_total, sink_total, issued, final, revenue


def estimate_break_even(points: Sequence[tuple[float, float]]) -> Optional[float]:
    """First upward zero-crossing of mean payoff over the grid, linearly
    interpolated. The true payoff is linear in p, so interpolation is unbiased."""
    ordered = sorted(points)
    for (p_lo, m_lo), (p_hi, m_hi) in zip(ordered, ordered[1:]):
        if m_lo == 0:
            return p_lo
        if m_lo < 0 <= m_hi:
            return p_lo + (0 - m_lo) * (p_hi - p_lo) / (m_hi - m_lo)
    if ordered and ordered[-1][1] == 0:
        return ordered[-1][0]
    return None


def run_simulation(config: SimConfig, workers: Optional[int] = None) -> SimReport:
    """Deterministic given the seed, independent of ``workers``: each grid
    point draws its whole Bernoulli stream up front from an independent
    spawned substream, trials are pure functions of the pre-drawn values, and
    the reduction is exact integer summation in block order."""
    verify = buyer_should_verify(config.buyer, config.terms)
    if workers is None:
        workers = os.cpu_count() or 1
    workers = max(1, min(workers, 8))
    substreams = np.random.SeedSequence(config.seed).spawn(len(config.grid))
    points: list[GridPointStats] = []
    issued_total = 0
    final_total = 0
    pool = None
    if workers > 1 and config.trials >= 5000:
        pool = multiprocessing.get_context("fork").Pool(workers)
    try:
        for p, substream in zip(config.grid, substreams):
            rng = np.random.default_rng(substream)
            draws = rng.random(config.trials) < float(p)
            if pool is not None:
                blocks = [b for b in np.array_split(draws, workers * 4) if len(b)]
                partials = pool.map(
                    _chunk_totals, [(config.terms, block, verify) for block in blocks]
                )
            else:
                partials = [_chunk_totals((config.terms, draws, verify))]
            seller_total = sum(part[0] for part in partials)
            seller_sumsq = sum(part[1] for part in partials)
            buyer_total = sum(part[2] for part in partials)
            sink_total = sum(part[3] for part in partials)
            issued_total += sum(part[4] for part in partials)
            final_total += sum(part[5] for part in partials)
            revenues = {part[6] for part in partials}
            expected_revenue = config.terms.buyer_fee + config.terms.seller_fee
            if revenues != {expected_revenue}:
                raise AssertionError(
                    f"exchange revenue {revenues} != fee total {expected_revenue}"
                )
            points.append(
                GridPointStats(
                    p=p,
                    trials=config.trials,
                    seller_net_total=seller_total,
                    seller_net_sumsq=seller_sumsq,
                    buyer_outflow_total=buyer_total,
                    sink_total=sink_total,
                    exchange_revenue_per_txn=expected_revenue,
                    would_participate=seller_expected_payoff(p, config.terms) > 0,
                )
            )
    finally:
        if pool is not None:
            pool.close()
            pool.join()
    return SimReport(
        terms=config.terms,
        grid=config.grid,
        trials=config.trials,
        seed=config.seed,
        buyer_verifies=verify,
        evidence_cost=config.buyer.evidence_cost,
        points=points,
        issued_total=issued_total,
        final_balance_total=final_total,
    )
