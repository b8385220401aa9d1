"""Closed-system double-entry ledger.

All money is held as exact integer minor units (cents). The ledger is the
single place balances change: supply enters only through explicit funding
records, and every transfer debits exactly one account and credits exactly
one account with the same positive amount. The sum of all balances therefore
equals total issuance at every reachable state, with no tolerance.

The ledger is deliberately protocol-agnostic: it enforces double-entry,
non-negative balances, and singleton fee/sink accounts, nothing else.
Transaction semantics live in the protocol module.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Union


class AccountKind(str, Enum):
    BUYER = "buyer"
    SELLER = "seller"
    ESCROW = "escrow"
    EXCHANGE_FEE = "exchange_fee"
    SINK = "sink"


# Singleton account kinds get fixed ids; one of each may exist per ledger.
_SINGLETON_KINDS = (AccountKind.EXCHANGE_FEE, AccountKind.SINK)


class Reason(str, Enum):
    """Closed enumeration of money-movement reasons, for auditability."""

    FUND = "FUND"                      # issuance into the closed system
    POST_PRICE = "POST_PRICE"          # buyer escrows the answer price
    POST_DEPOSIT = "POST_DEPOSIT"      # buyer escrows the evidence deposit
    STAKE = "STAKE"                    # seller escrows the at-risk stake
    FEE_BUYER = "FEE_BUYER"            # flat brokering fee charged to buyer
    FEE_SELLER = "FEE_SELLER"          # flat brokering fee charged to seller
    PAYOUT_PRICE = "PAYOUT_PRICE"      # price released to the seller
    RETURN_STAKE = "RETURN_STAKE"      # stake released back to the seller
    RETURN_DEPOSIT = "RETURN_DEPOSIT"  # deposit released back to the buyer
    FORFEIT_STAKE = "FORFEIT_STAKE"    # stake absorbed by the sink
    FORFEIT_DEPOSIT = "FORFEIT_DEPOSIT"  # deposit absorbed by the sink
    SINK_PRICE = "SINK_PRICE"          # price absorbed by the sink
    REFUND = "REFUND"                  # money returned to the buyer


class LedgerError(Exception):
    """Base class for ledger failures."""


class UnknownAccount(LedgerError):
    pass


class DuplicateSingleton(LedgerError):
    pass


class InsufficientFunds(LedgerError):
    pass


class SameAccount(LedgerError):
    pass


class NonPositiveAmount(LedgerError):
    pass


@dataclass(frozen=True, slots=True)
class AccountId:
    id: str
    kind: AccountKind

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True, slots=True)
class LedgerEntry:
    """One journal record.

    ``debit`` is None only for funding records, which deposit new supply into
    the closed system; every other entry is a pure transfer.
    """

    seq: int
    debit: Optional[str]
    credit: str
    amount: int
    reason: str
    txn: Optional[str]

    def to_json(self) -> str:
        # Fixed field order and compact separators so exports are
        # byte-deterministic and round-trip exactly.
        return json.dumps(
            {
                "seq": self.seq,
                "debit": self.debit,
                "credit": self.credit,
                "amount": self.amount,
                "reason": self.reason,
                "txn": self.txn,
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "LedgerEntry":
        rec = json.loads(line)
        return cls(
            seq=int(rec["seq"]),
            debit=rec["debit"],
            credit=rec["credit"],
            amount=int(rec["amount"]),
            reason=str(rec["reason"]),
            txn=rec["txn"],
        )


AccountRef = Union[AccountId, str]


def _ref_id(account: AccountRef) -> str:
    return account.id if isinstance(account, AccountId) else account


class Ledger:
    """Exact-integer ledger with a single serialized writer.

    Mutations take an internal lock; concurrent readers observe only fully
    applied entries. Balances can never go negative and entry sequence
    numbers are gapless from 1.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._balances: dict[str, int] = {}
        self._kinds: dict[str, AccountKind] = {}
        self._owners: dict[str, Optional[str]] = {}
        self._entries: list[LedgerEntry] = []
        self._issued = 0
        self._counters: dict[AccountKind, int] = {}

    # -- accounts ------------------------------------------------------

    def open_account(self, kind: AccountKind, owner: Optional[str] = None) -> AccountId:
        """Open a fresh zero-balance account.

        Escrow accounts are identified by their owning transaction id; the
        exchange_fee and sink accounts are singletons with fixed ids.
        """
        if not isinstance(kind, AccountKind):
            kind = AccountKind(kind)
        with self._lock:
            if kind in _SINGLETON_KINDS:
                acct_id = kind.value
                if acct_id in self._balances:
                    raise DuplicateSingleton(f"{kind.value} account already exists")
            elif kind is AccountKind.ESCROW:
                if owner is None:
                    raise LedgerError("escrow accounts require an owning transaction id")
                acct_id = f"escrow-{owner}"
                if acct_id in self._balances:
                    raise LedgerError(f"escrow account for {owner!r} already exists")
            else:
                n = self._counters.get(kind, 0) + 1
                self._counters[kind] = n
                acct_id = f"{kind.value}-{n}"
            self._balances[acct_id] = 0
            self._kinds[acct_id] = kind
            self._owners[acct_id] = owner
            return AccountId(acct_id, kind)

    def account(self, account: AccountRef) -> AccountId:
        acct_id = _ref_id(account)
        kind = self._kinds.get(acct_id)
        if kind is None:
            raise UnknownAccount(acct_id)
        return AccountId(acct_id, kind)

    def has_account(self, account: AccountRef) -> bool:
        return _ref_id(account) in self._balances

    def accounts(self) -> list[AccountId]:
        with self._lock:
            return [AccountId(a, self._kinds[a]) for a in sorted(self._balances)]

    # -- movements -----------------------------------------------------

    def fund(self, account: AccountRef, amount: int, txn: Optional[str] = None) -> LedgerEntry:
        """Deposit new supply into an account.

        Funding is the only way balances enter the system; every grant is
        journaled (debit side null) so conservation stays checkable against
        total issuance.
        """
        acct_id = account.id if type(account) is AccountId else account
        if type(amount) is not int or amount <= 0:
            raise NonPositiveAmount(f"amount must be a positive integer, got {amount!r}")
        with self._lock:
            if acct_id not in self._balances:
                raise UnknownAccount(acct_id)
            entry = LedgerEntry(
                len(self._entries) + 1, None, acct_id, amount, Reason.FUND.value, txn
            )
            self._balances[acct_id] += amount
            self._issued += amount
            self._entries.append(entry)
            return entry

    def post_entry(
        self,
        debit: AccountRef,
        credit: AccountRef,
        amount: int,
        reason: Union[Reason, str],
        txn: Optional[str] = None,
    ) -> LedgerEntry:
        """Move ``amount`` from ``debit`` to ``credit`` atomically.

        Rejected entries leave no trace: the balance check happens before
        any mutation, under the writer lock.
        """
        debit_id = debit.id if type(debit) is AccountId else debit
        credit_id = credit.id if type(credit) is AccountId else credit
        if type(amount) is not int or amount <= 0:
            raise NonPositiveAmount(f"amount must be a positive integer, got {amount!r}")
        if debit_id == credit_id:
            raise SameAccount(debit_id)
        reason_code = reason.value if type(reason) is Reason else Reason(reason).value
        balances = self._balances
        with self._lock:
            if debit_id not in balances:
                raise UnknownAccount(debit_id)
            if credit_id not in balances:
                raise UnknownAccount(credit_id)
            if balances[debit_id] < amount:
                raise InsufficientFunds(
                    f"{debit_id} holds {balances[debit_id]}, needs {amount}"
                )
            entry = LedgerEntry(
                len(self._entries) + 1, debit_id, credit_id, amount, reason_code, txn
            )
            balances[debit_id] -= amount
            balances[credit_id] += amount
            self._entries.append(entry)
            return entry

    # -- reads ---------------------------------------------------------

    def balance_of(self, account: AccountRef) -> int:
        acct_id = _ref_id(account)
        try:
            return self._balances[acct_id]
        except KeyError:
            raise UnknownAccount(acct_id) from None

    def total_supply(self) -> int:
        """Sum of all balances; equals total issuance in every reachable state."""
        with self._lock:
            return sum(self._balances.values())

    @property
    def total_issued(self) -> int:
        return self._issued

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        with self._lock:
            return tuple(self._entries)

    def balances(self) -> dict[str, int]:
        with self._lock:
            return dict(self._balances)

    # -- journal export / import ---------------------------------------

    def export_journal(self) -> str:
        """One JSON object per line, LF endings, byte-deterministic."""
        return "".join(e.to_json() + "\n" for e in self.entries)

    @classmethod
    def import_journal(cls, text: str) -> "Ledger":
        """Rebuild a ledger by replaying an exported journal.

        Account kinds are recovered from the id prefix (ids are minted as
        ``<kind>-<n>``); owner metadata is not part of the journal.
        """
        ledger = cls()
        entries = [LedgerEntry.from_json(line) for line in text.splitlines() if line]
        for expected_seq, entry in enumerate(entries, start=1):
            if entry.seq != expected_seq:
                raise LedgerError(
                    f"journal sequence gap: expected {expected_seq}, got {entry.seq}"
                )
            for acct_id in (entry.debit, entry.credit):
                if acct_id is not None and acct_id not in ledger._balances:
                    ledger._adopt_account(acct_id)
            if entry.debit is None:
                ledger.fund(entry.credit, entry.amount, txn=entry.txn)
            else:
                ledger.post_entry(
                    entry.debit, entry.credit, entry.amount, entry.reason, txn=entry.txn
                )
        return ledger

    def _adopt_account(self, acct_id: str) -> None:
        kind = _kind_from_id(acct_id)
        self._balances[acct_id] = 0
        self._kinds[acct_id] = kind
        self._owners[acct_id] = None
        if kind not in (AccountKind.ESCROW, *_SINGLETON_KINDS):
            prefix = f"{kind.value}-"
            suffix = acct_id[len(prefix):]
            if suffix.isdigit():
                self._counters[kind] = max(self._counters.get(kind, 0), int(suffix))


def _kind_from_id(acct_id: str) -> AccountKind:
    for kind in AccountKind:
        if acct_id == kind.value or acct_id.startswith(f"{kind.value}-"):
            return kind
    raise LedgerError(f"cannot infer account kind from id {acct_id!r}")


def replay_balances(entries: Iterable[LedgerEntry]) -> dict[str, int]:
    """Fold a journal into balances, independent of Ledger internals.

    Used as the oracle for replay-equivalence and settlement checks.
    """
    balances: dict[str, int] = {}
    for entry in entries:
        if entry.debit is not None:
            balances[entry.debit] = balances.get(entry.debit, 0) - entry.amount
        balances[entry.credit] = balances.get(entry.credit, 0) + entry.amount
    return balances
