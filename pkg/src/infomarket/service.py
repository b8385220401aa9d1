"""The central exchange as an event-sourced service.

Parties register under opaque pseudonyms and authenticate with a secret
credential; counterparties only ever see each other's pseudonyms. Every
mutating request maps to exactly one journal event, durably appended before
the response is sent, so killing the process at any point and replaying the
log reproduces the state byte for byte.

Money enters through an admin-only faucet (this is a closed system, not a
payment processor), which keeps conservation checkable against total
issuance at all times.
"""

from __future__ import annotations

import base64
import hashlib
import json
import secrets
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .adjudication import (
    AdjudicationPolicy,
    AutoAttestation,
    Decision,
    DecisionStore,
    ManualRuling,
    auto_verdict,
    manual_verdict,
    policy_from_dict,
    policy_to_dict,
)
from .answerspec import spec_from_dict, spec_to_dict
from .eventlog import CorruptEvent, Event, EventKind, EventLog
from .ledger import AccountKind, Ledger
from .protocol import (
    Exchange,
    Terms,
    Transaction,
    TxnState,
    Verdict,
    WrongState,
    payout_rows,
    transaction_to_dict,
)

PUBLIC_CAPABILITIES = ("buy", "sell", "arbitrate")


class ServiceError(Exception):
    pass


class Unauthenticated(ServiceError):
    pass


class Forbidden(ServiceError):
    pass


class NotFoundError(ServiceError):
    """Also covers existence hiding: outsiders cannot probe for transactions."""


@dataclass
class ServiceConfig:
    listen_address: str = "127.0.0.1:8100"
    data_dir: Optional[str] = None
    default_buyer_fee: int = 5000
    default_seller_fee: int = 5000
    clock_mode: str = "simulated"  # "simulated" or "real"
    admin_credential: Optional[str] = None

    def __post_init__(self) -> None:
        if self.clock_mode not in ("simulated", "real"):
            raise ServiceError(f"unknown clock mode {self.clock_mode!r}")

    @classmethod
    def parse(cls, text: str) -> "ServiceConfig":
        """key=value lines; blank lines and #-comments ignored."""
        values: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ServiceError(f"config line {lineno} is not key=value: {line!r}")
            key, _, value = stripped.partition("=")
            values[key.strip()] = value.strip()
        cfg = cls()
        if "listen_address" in values:
            cfg.listen_address = values["listen_address"]
        if "data_dir" in values:
            cfg.data_dir = values["data_dir"] or None
        if "default_buyer_fee" in values:
            cfg.default_buyer_fee = int(values["default_buyer_fee"])
        if "default_seller_fee" in values:
            cfg.default_seller_fee = int(values["default_seller_fee"])
        if "clock_mode" in values:
            cfg.clock_mode = values["clock_mode"]
        if "admin_credential" in values:
            cfg.admin_credential = values["admin_credential"] or None
        cfg.__post_init__()
        return cfg

    def to_text(self) -> str:
        lines = [
            f"listen_address={self.listen_address}",
            f"data_dir={self.data_dir or ''}",
            f"default_buyer_fee={self.default_buyer_fee}",
            f"default_seller_fee={self.default_seller_fee}",
            f"clock_mode={self.clock_mode}",
        ]
        if self.admin_credential:
            lines.append(f"admin_credential={self.admin_credential}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, slots=True)
class PartyRegistration:
    pseudonym: str
    credential_sha256: str
    capabilities: tuple[str, ...]
    account_id: Optional[str]
    is_admin: bool = False


def _hash_credential(credential: str) -> str:
    return hashlib.sha256(credential.encode("utf-8")).hexdigest()


class ExchangeService:
    """Request-level facade over the protocol engine.

    The ``_apply_event`` layer is shared between the live path and log
    replay; operations carrying a live caller identity run the protocol
    operation directly (preserving its error ordering) and journal only on
    success, so the log never contains a failed request.
    """

    def __init__(self, config: Optional[ServiceConfig] = None, log: Optional[EventLog] = None):
        self.config = config or ServiceConfig()
        self.log = log if log is not None else EventLog()
        self.ledger = Ledger()
        self.exchange = Exchange(self.ledger)
        self.decisions = DecisionStore()
        self.parties: dict[str, PartyRegistration] = {}
        self._by_credential_hash: dict[str, str] = {}
        self.policies: dict[str, AdjudicationPolicy] = {}
        self._sim_now = 0
        self.admin_credential: Optional[str] = None

    # -- construction ----------------------------------------------------

    @classmethod
    def fresh(
        cls,
        config: Optional[ServiceConfig] = None,
        log_path: Optional[Path] = None,
    ) -> "ExchangeService":
        """New service; the admin identity is the first journal event."""
        service = cls(config, EventLog(log_path))
        credential = service.config.admin_credential or secrets.token_hex(16)
        service.admin_credential = credential
        service._commit(
            EventKind.REGISTERED,
            {
                "pseudonym": "admin",
                "credential_sha256": _hash_credential(credential),
                "capabilities": [],
                "account_kind": None,
                "is_admin": True,
            },
        )
        return service

    @classmethod
    def replay_log(
        cls, events: list[Event], config: Optional[ServiceConfig] = None
    ) -> "ExchangeService":
        """Reconstruct a service purely from an ordered event list."""
        service = cls(config, EventLog())
        for event in events:
            service._apply_event(event)
            service.log.append_event(event)
        if service.config.admin_credential:
            service.admin_credential = service.config.admin_credential
        return service

    @classmethod
    def recover(
        cls, log_path: Path, config: Optional[ServiceConfig] = None
    ) -> "ExchangeService":
        """Rebuild from an existing log file and keep appending to it."""
        events = EventLog.read(log_path)
        service = cls.replay_log(events, config)
        service.log.close()
        service.log = EventLog(log_path, preloaded=events)
        return service

    # -- clock -----------------------------------------------------------

    def now(self) -> int:
        if self.config.clock_mode == "simulated":
            return self._sim_now
        return int(time.time())

    # -- authentication ----------------------------------------------------

    def authenticate(self, credential: Optional[str]) -> PartyRegistration:
        if not credential:
            raise Unauthenticated("missing credential")
        pseudonym = self._by_credential_hash.get(_hash_credential(credential))
        if pseudonym is None:
            raise Unauthenticated("unknown credential")
        return self.parties[pseudonym]

    def _require_admin(self, party: PartyRegistration) -> None:
        if not party.is_admin:
            raise Forbidden("admin credential required")

    # -- event plumbing ----------------------------------------------------

    def _commit(self, kind: str, payload: dict, apply: bool = True) -> Event:
        """Journal one event for a mutating request, applying it first.

        With ``apply=False`` the caller has already mutated state through the
        protocol engine and the event records the accomplished fact.
        """
        event = Event(
            seq=len(self.log) + 1,
            kind=kind,
            payload=payload,
            recorded_at=self.now(),
        )
        if apply:
            self._apply_event(event)
        self.log.append_event(event)
        return event

    def _apply_event(self, event: Event) -> None:
        payload, now = event.payload, event.recorded_at
        try:
            if event.kind == EventKind.REGISTERED:
                self._apply_register(payload)
            elif event.kind == EventKind.FUNDED:
                self.ledger.fund(payload["account_id"], payload["amount"])
            elif event.kind == EventKind.QUESTION_CREATED:
                self._apply_question_created(payload)
            elif event.kind == EventKind.QUESTION_POSTED:
                self.exchange.post_question(self.exchange.get(payload["id"]))
            elif event.kind == EventKind.ACCEPTED:
                self.exchange.accept_question(
                    self.exchange.get(payload["id"]), payload["seller"], now
                )
            elif event.kind == EventKind.ANSWERED:
                txn = self.exchange.get(payload["id"])
                self.exchange.submit_answer(txn, txn.seller, payload["raw"], now)
            elif event.kind == EventKind.EVIDENCE_SUBMITTED:
                txn = self.exchange.get(payload["id"])
                body = base64.b64decode(payload["body_b64"])
                self.exchange.submit_evidence(txn, txn.buyer, body, now)
            elif event.kind == EventKind.ADJUDICATED:
                self._apply_adjudicated(payload)
            elif event.kind == EventKind.SETTLED:
                txn = self.exchange.get(payload["id"])
                self.exchange.advance_time(txn, now)
                self.exchange.settle(txn)
            elif event.kind == EventKind.TIME_ADVANCED:
                self._sim_now = payload["now"]
            else:
                raise CorruptEvent(f"unknown event kind {event.kind!r}")
        except KeyError as exc:
            raise CorruptEvent(f"event {event.seq} missing field {exc}") from exc

    def _apply_register(self, payload: dict) -> None:
        pseudonym = payload["pseudonym"]
        account_id = None
        if payload.get("account_kind"):
            account = self.exchange.register_party(
                pseudonym, AccountKind(payload["account_kind"])
            )
            account_id = account.id
        registration = PartyRegistration(
            pseudonym=pseudonym,
            credential_sha256=payload["credential_sha256"],
            capabilities=tuple(payload["capabilities"]),
            account_id=account_id,
            is_admin=bool(payload.get("is_admin", False)),
        )
        self.parties[pseudonym] = registration
        self._by_credential_hash[registration.credential_sha256] = pseudonym

    def _apply_question_created(self, payload: dict) -> None:
        spec = spec_from_dict(payload["spec"])
        terms = Terms.from_dict(payload["terms"])
        txn = self.exchange.create_question(
            payload["buyer"], payload["question_text"], spec, terms
        )
        if txn.id != payload["id"]:
            raise CorruptEvent(
                f"replayed transaction id {txn.id} != journaled {payload['id']}"
            )
        self.policies[txn.id] = policy_from_dict(payload["policy"])

    def _apply_adjudicated(self, payload: dict) -> None:
        txn = self.exchange.get(payload["id"])
        decision = Decision(
            verdict=Verdict(payload["verdict"]),
            rationale=payload["rationale"],
            decided_at=payload["decided_at"],
            policy_used=payload["policy_used"],
        )
        self.exchange.adjudicate(txn, decision.verdict)
        self.decisions.record(txn.id, decision)

    # -- public operations --------------------------------------------------

    def register(self, capabilities: list[str]) -> dict:
        caps = tuple(dict.fromkeys(capabilities))
        for cap in caps:
            if cap not in PUBLIC_CAPABILITIES:
                raise ServiceError(f"unknown capability {cap!r}")
        if not caps:
            raise ServiceError("at least one capability is required")
        pseudonym = self._mint_pseudonym()
        credential = secrets.token_hex(16)
        if "buy" in caps:
            account_kind = AccountKind.BUYER.value
        elif "sell" in caps:
            account_kind = AccountKind.SELLER.value
        else:
            account_kind = None  # pure arbiters hold no money
        self._commit(
            EventKind.REGISTERED,
            {
                "pseudonym": pseudonym,
                "credential_sha256": _hash_credential(credential),
                "capabilities": list(caps),
                "account_kind": account_kind,
                "is_admin": False,
            },
        )
        registration = self.parties[pseudonym]
        return {
            "pseudonym": pseudonym,
            "credential": credential,
            "capabilities": list(caps),
            "account_id": registration.account_id,
        }

    def _mint_pseudonym(self) -> str:
        while True:
            pseudonym = f"p-{secrets.token_hex(6)}"
            if pseudonym not in self.parties:
                return pseudonym

    def fund(self, credential: str, account_id: str, amount: int) -> dict:
        party = self.authenticate(credential)
        self._require_admin(party)
        if not self.ledger.has_account(account_id):
            raise NotFoundError(f"no account {account_id!r}")
        self._commit(EventKind.FUNDED, {"account_id": account_id, "amount": int(amount)})
        return {"account_id": account_id, "balance": self.ledger.balance_of(account_id)}

    def create_question(
        self,
        credential: str,
        text: str,
        spec: dict,
        terms: dict,
        policy: Optional[dict] = None,
    ) -> dict:
        party = self.authenticate(credential)
        if "buy" not in party.capabilities:
            raise Forbidden("buy capability required")
        terms = dict(terms)
        terms.setdefault("buyer_fee", self.config.default_buyer_fee)
        terms.setdefault("seller_fee", self.config.default_seller_fee)
        parsed_terms = Terms.from_dict(terms)
        parsed_spec = spec_from_dict(spec)
        policy_dict = policy if policy is not None else policy_to_dict(AutoAttestation())
        parsed_policy = policy_from_dict(policy_dict)
        if isinstance(parsed_policy, ManualRuling):
            arbiter = self.parties.get(parsed_policy.arbiter)
            if arbiter is None or "arbitrate" not in arbiter.capabilities:
                raise ServiceError(f"{parsed_policy.arbiter!r} is not a registered arbiter")
        next_id = self.exchange.peek_next_txn_id()
        self._commit(
            EventKind.QUESTION_CREATED,
            {
                "id": next_id,
                "buyer": party.pseudonym,
                "question_text": str(text),
                "spec": spec_to_dict(parsed_spec),
                "terms": parsed_terms.to_dict(),
                "policy": policy_to_dict(parsed_policy),
            },
        )
        return self.render_view(self.exchange.get(next_id), party.pseudonym)

    def post_question(self, credential: str, txn_id: str) -> dict:
        party = self.authenticate(credential)
        txn = self._visible_txn(txn_id, party)
        if party.pseudonym != txn.buyer:
            raise Forbidden("only the buyer may post the question")
        self.exchange.post_question(txn)
        self._commit(EventKind.QUESTION_POSTED, {"id": txn_id}, apply=False)
        return self.render_view(txn, party.pseudonym)

    def accept_question(self, credential: str, txn_id: str) -> dict:
        party = self.authenticate(credential)
        txn = self._visible_txn(txn_id, party)
        if "sell" not in party.capabilities:
            raise Forbidden("sell capability required")
        self.exchange.accept_question(txn, party.pseudonym, self.now())
        self._commit(
            EventKind.ACCEPTED, {"id": txn_id, "seller": party.pseudonym}, apply=False
        )
        return self.render_view(txn, party.pseudonym)

    def submit_answer(self, credential: str, txn_id: str, raw: str) -> dict:
        party = self.authenticate(credential)
        txn = self._visible_txn(txn_id, party)
        self.exchange.submit_answer(txn, party.pseudonym, str(raw), self.now())
        self._commit(EventKind.ANSWERED, {"id": txn_id, "raw": str(raw)}, apply=False)
        return self.render_view(txn, party.pseudonym)

    def submit_evidence(self, credential: str, txn_id: str, body: str) -> dict:
        party = self.authenticate(credential)
        txn = self._visible_txn(txn_id, party)
        body_bytes = body.encode("utf-8") if isinstance(body, str) else bytes(body)
        self.exchange.submit_evidence(txn, party.pseudonym, body_bytes, self.now())
        self._commit(
            EventKind.EVIDENCE_SUBMITTED,
            {"id": txn_id, "body_b64": base64.b64encode(body_bytes).decode("ascii")},
            apply=False,
        )
        return self.render_view(txn, party.pseudonym)

    def adjudicate(
        self,
        credential: str,
        txn_id: str,
        verdict: Optional[str] = None,
        rationale: Optional[str] = None,
    ) -> dict:
        party = self.authenticate(credential)
        txn = self._visible_txn(txn_id, party)
        policy = self.policies[txn_id]
        if self.decisions.get(txn_id) is not None:
            raise WrongState(f"transaction {txn_id} already has a decision")
        if isinstance(policy, ManualRuling):
            if not verdict:
                raise ServiceError("manual ruling requires a verdict")
            try:
                parsed = Verdict(verdict)
            except ValueError:
                raise ServiceError(f"unknown verdict {verdict!r}") from None
            decision = manual_verdict(
                arbiter=party.pseudonym,
                txn=txn,
                verdict=parsed,
                rationale=rationale or "",
                policy=policy,
                now=self.now(),
            )
        else:
            if txn.state is not TxnState.EVIDENCE_SUBMITTED:
                raise WrongState(f"cannot adjudicate a {txn.state.value} transaction")
            decision = auto_verdict(txn.spec, txn.answer, txn.evidence, policy.schema)
        self._commit(
            EventKind.ADJUDICATED,
            {
                "id": txn_id,
                "verdict": decision.verdict.value,
                "rationale": decision.rationale,
                "decided_at": decision.decided_at,
                "policy_used": decision.policy_used,
            },
        )
        return self.render_view(txn, party.pseudonym)

    def settle(self, credential: str, txn_id: str) -> dict:
        """Settle a terminal transaction; expiry transitions are applied on
        the way in (advance_time is idempotent), so a question whose deadline
        lapsed settles in one request."""
        party = self.authenticate(credential)
        txn = self._visible_txn(txn_id, party)
        if not party.is_admin and party.pseudonym not in self._participants(txn):
            raise Forbidden("only participants may settle")
        self.exchange.advance_time(txn, self.now())
        self.exchange.settle(txn)
        self._commit(EventKind.SETTLED, {"id": txn_id}, apply=False)
        return self.render_view(txn, party.pseudonym)

    def tick(self, credential: str, seconds: int) -> dict:
        """Advance the simulated clock. Transactions are not eagerly expired:
        deadline checks fire inside the protocol operations (a late answer is
        gone, not a state conflict) and settle() materializes expiry."""
        party = self.authenticate(credential)
        self._require_admin(party)
        if self.config.clock_mode != "simulated":
            raise ServiceError("tick is only available with the simulated clock")
        seconds = int(seconds)
        if seconds < 0:
            raise ServiceError("time cannot move backwards")
        self._commit(EventKind.TIME_ADVANCED, {"now": self._sim_now + seconds})
        return {"now": self._sim_now}

    # -- reads ---------------------------------------------------------------

    def get_question(self, credential: str, txn_id: str) -> dict:
        party = self.authenticate(credential)
        txn = self._visible_txn(txn_id, party)
        return self.render_view(txn, party.pseudonym)

    def get_account(self, credential: str, account_id: str) -> dict:
        party = self.authenticate(credential)
        if not self.ledger.has_account(account_id) or not (
            party.is_admin or self._account_visible(account_id, party)
        ):
            raise NotFoundError(f"no account {account_id!r}")
        account = self.ledger.account(account_id)
        return {
            "id": account.id,
            "kind": account.kind.value,
            "balance": self.ledger.balance_of(account_id),
        }

    def _account_visible(self, account_id: str, party: PartyRegistration) -> bool:
        if account_id == party.account_id:
            return True
        # Participants may watch the escrow of their own transactions.
        if account_id.startswith("escrow-"):
            txn = self.exchange.transactions.get(account_id[len("escrow-"):])
            if txn is not None:
                return party.pseudonym in (txn.buyer, txn.seller)
        return False

    # -- views ----------------------------------------------------------------

    def _participants(self, txn: Transaction) -> set[str]:
        names = {txn.buyer}
        if txn.seller is not None:
            names.add(txn.seller)
        policy = self.policies.get(txn.id)
        if isinstance(policy, ManualRuling):
            names.add(policy.arbiter)
        return names

    def _visible_txn(self, txn_id: str, party: PartyRegistration) -> Transaction:
        txn = self.exchange.transactions.get(txn_id)
        if txn is not None:
            if party.is_admin or party.pseudonym in self._participants(txn):
                return txn
            # A Posted question is a live listing: parties able to sell may
            # review it (by id, obtained out of band) before staking.
            if txn.state is TxnState.POSTED and "sell" in party.capabilities:
                return txn
        # Existence hiding: outsiders cannot distinguish missing from real.
        raise NotFoundError(f"no transaction {txn_id!r}")

    def render_view(self, txn: Transaction, viewer: str) -> dict:
        """Transaction as seen by one party: pseudonyms only, no credentials,
        counterparty account ids withheld."""
        party = self.parties[viewer]
        txn = self._visible_txn(txn.id, party)
        policy = self.policies.get(txn.id)
        if viewer == txn.buyer:
            role = "buyer"
        elif viewer == txn.seller:
            role = "seller"
        elif isinstance(policy, ManualRuling) and viewer == policy.arbiter:
            role = "arbiter"
        elif party.is_admin:
            role = "admin"
        else:
            role = "prospective_seller"
        decision = self.decisions.get(txn.id)
        view = transaction_to_dict(txn)
        view["your_role"] = role
        view["now"] = self.now()
        view["escrow_balance"] = self.ledger.balance_of(txn.escrow_account)
        view["policy"] = policy_to_dict(policy) if policy is not None else None
        view["decision"] = decision.to_dict() if decision is not None else None
        view["payout_preview"] = self.payout_preview(txn)
        if txn.evidence is not None and role in ("buyer", "arbiter", "admin"):
            view["evidence"] = dict(view["evidence"])
            view["evidence"]["body_b64"] = base64.b64encode(txn.evidence.body).decode("ascii")
        return view

    def payout_preview(self, txn: Transaction) -> dict:
        """Settlement rows per possible outcome, straight from the payout table."""

        def rows_as_dicts(rows):
            return [
                {
                    "source": row.source,
                    "destination": row.destination,
                    "amount": row.amount,
                    "reason": row.reason.value,
                }
                for row in rows
            ]

        preview = {
            verdict.value: rows_as_dicts(payout_rows(TxnState.ADJUDICATED, verdict, txn.terms))
            for verdict in Verdict
        }
        if txn.state in (
            TxnState.ANSWER_REJECTED,
            TxnState.EXPIRED_UNANSWERED,
            TxnState.EXPIRED_UNVERIFIED,
            TxnState.EXPIRED_UNACCEPTED,
        ):
            preview[txn.state.value] = rows_as_dicts(payout_rows(txn.state, None, txn.terms))
        return preview

    # -- state serialization ------------------------------------------------------

    def serialize_state(self) -> bytes:
        """Canonical JSON snapshot; byte-identical iff states are identical."""
        state = {
            "clock": self._sim_now if self.config.clock_mode == "simulated" else None,
            "event_count": len(self.log),
            "issued": self.ledger.total_issued,
            "accounts": [
                {"id": a.id, "kind": a.kind.value, "balance": self.ledger.balance_of(a)}
                for a in self.ledger.accounts()
            ],
            "journal": [
                {
                    "seq": e.seq,
                    "debit": e.debit,
                    "credit": e.credit,
                    "amount": e.amount,
                    "reason": e.reason,
                    "txn": e.txn,
                }
                for e in self.ledger.entries
            ],
            "parties": [
                {
                    "pseudonym": p.pseudonym,
                    "credential_sha256": p.credential_sha256,
                    "capabilities": list(p.capabilities),
                    "account_id": p.account_id,
                    "is_admin": p.is_admin,
                }
                for _, p in sorted(self.parties.items())
            ],
            "transactions": [
                dict(
                    transaction_to_dict(txn),
                    policy=policy_to_dict(self.policies[txn_id]),
                )
                for txn_id, txn in sorted(self.exchange.transactions.items())
            ],
            "decisions": [
                dict(decision.to_dict(), txn=txn_id)
                for txn_id, decision in self.decisions.items()
            ],
        }
        return json.dumps(state, sort_keys=True, separators=(",", ":")).encode("utf-8")
