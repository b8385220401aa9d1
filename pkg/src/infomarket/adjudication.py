"""Verdict production.

Two policies: AutoAttestation decides mechanically from a structured
attestation the buyer submits as evidence, ManualRuling records a human
arbiter's call. Either way a transaction gets exactly one immutable
Decision, and nothing in this module moves money: the exchange is paid its
flat fees at brokering time, so its revenue cannot depend on how it rules.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Union

from .answerspec import AnswerSpec, AnswerValue, Membership, evaluate_answer
from .protocol import EvidenceRecord, Transaction, TxnState, Verdict


class AdjudicationError(Exception):
    pass


class NotArbiter(AdjudicationError):
    pass


class EmptyRationale(AdjudicationError):
    pass


@dataclass(frozen=True, slots=True)
class AttestationSchema:
    """Required shape of auto-adjudicable evidence: a flat JSON object whose
    fields are all strings and whose claimed outcome must canonicalize under
    the question's own answer spec."""

    outcome_field: str = "claimed_outcome"
    note_field: str = "supporting_note"


@dataclass(frozen=True, slots=True)
class AutoAttestation:
    schema: AttestationSchema = AttestationSchema()

    tag = "auto_attestation"


@dataclass(frozen=True, slots=True)
class ManualRuling:
    arbiter: str

    tag = "manual_ruling"


AdjudicationPolicy = Union[AutoAttestation, ManualRuling]


@dataclass(frozen=True, slots=True)
class Decision:
    verdict: Verdict
    rationale: str
    decided_at: int
    policy_used: str

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "rationale": self.rationale,
            "decided_at": self.decided_at,
            "policy_used": self.policy_used,
        }


def policy_to_dict(policy: AdjudicationPolicy) -> dict:
    if isinstance(policy, AutoAttestation):
        return {
            "variant": "AutoAttestation",
            "schema": {
                "outcome_field": policy.schema.outcome_field,
                "note_field": policy.schema.note_field,
            },
        }
    if isinstance(policy, ManualRuling):
        return {"variant": "ManualRuling", "arbiter": policy.arbiter}
    raise AdjudicationError(f"unknown policy type {type(policy).__name__}")


def policy_from_dict(data: dict) -> AdjudicationPolicy:
    try:
        variant = data["variant"]
        if variant == "AutoAttestation":
            schema = data.get("schema") or {}
            return AutoAttestation(
                schema=AttestationSchema(
                    outcome_field=schema.get("outcome_field", "claimed_outcome"),
                    note_field=schema.get("note_field", "supporting_note"),
                )
            )
        if variant == "ManualRuling":
            return ManualRuling(arbiter=str(data["arbiter"]))
    except (KeyError, TypeError) as exc:
        raise AdjudicationError(f"malformed policy: {exc}") from exc
    raise AdjudicationError(f"unknown policy variant {variant!r}")


def _parse_attestation(body: bytes, schema: AttestationSchema) -> Optional[str]:
    """Extract the claimed outcome, or None if the evidence is malformed."""
    try:
        doc = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return None
    if not isinstance(doc, dict):
        return None
    outcome = doc.get(schema.outcome_field)
    note = doc.get(schema.note_field)
    if not isinstance(outcome, str) or not isinstance(note, str):
        return None
    return outcome


def auto_verdict(
    spec: AnswerSpec,
    answer: AnswerValue,
    evidence: EvidenceRecord,
    schema: AttestationSchema = AttestationSchema(),
) -> Decision:
    """Mechanical ruling from a structured attestation.

    Claimed outcome in the allowed set and equal to the seller's canonical
    answer -> Correct; in the set but different -> Incorrect; anything
    malformed or outside the set -> InsufficientEvidence. Total and
    deterministic: the decision timestamp is the evidence timestamp, so
    identical inputs always produce identical Decisions.
    """
    claimed = _parse_attestation(evidence.body, schema)
    if claimed is None:
        return Decision(
            verdict=Verdict.INSUFFICIENT_EVIDENCE,
            rationale="evidence does not parse as a structured attestation",
            decided_at=evidence.submitted_at,
            policy_used=AutoAttestation.tag,
        )
    value, membership = evaluate_answer(spec, claimed)
    if membership is not Membership.IN_SET or value is None:
        return Decision(
            verdict=Verdict.INSUFFICIENT_EVIDENCE,
            rationale="claimed outcome is outside the allowed answer set",
            decided_at=evidence.submitted_at,
            policy_used=AutoAttestation.tag,
        )
    if value.canonical == answer.canonical:
        verdict, why = Verdict.CORRECT, "claimed outcome matches the answer"
    else:
        verdict, why = Verdict.INCORRECT, "claimed outcome contradicts the answer"
    return Decision(
        verdict=verdict,
        rationale=why,
        decided_at=evidence.submitted_at,
        policy_used=AutoAttestation.tag,
    )


def manual_verdict(
    arbiter: str,
    txn: Transaction,
    verdict: Verdict,
    rationale: str,
    policy: ManualRuling,
    now: int,
) -> Decision:
    """Record a human ruling; only the policy's arbiter may issue it."""
    if not isinstance(policy, ManualRuling):
        raise AdjudicationError("transaction is not under manual ruling")
    if arbiter != policy.arbiter:
        raise NotArbiter(f"{arbiter!r} is not the assigned arbiter")
    if txn.state is not TxnState.EVIDENCE_SUBMITTED:
        from .protocol import WrongState

        raise WrongState(f"cannot rule on a {txn.state.value} transaction")
    if not rationale.strip():
        raise EmptyRationale("a ruling requires a rationale")
    return Decision(
        verdict=Verdict(verdict),
        rationale=rationale,
        decided_at=now,
        policy_used=ManualRuling.tag,
    )


class DecisionStore:
    """Append-once store: one Decision per transaction, immutable thereafter."""

    def __init__(self) -> None:
        self._decisions: dict[str, Decision] = {}

    def record(self, txn_id: str, decision: Decision) -> Decision:
        from .protocol import WrongState

        if txn_id in self._decisions:
            raise WrongState(f"transaction {txn_id} already has a decision")
        self._decisions[txn_id] = decision
        return decision

    def get(self, txn_id: str) -> Optional[Decision]:
        return self._decisions.get(txn_id)

    def items(self) -> list[tuple[str, Decision]]:
        return sorted(self._decisions.items())
