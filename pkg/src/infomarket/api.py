"""HTTP adapter: JSON endpoints over the exchange service.

The adapter owns no business logic; it extracts the credential header and
the request body, dispatches to the service, and maps module errors onto
status codes:

    400 malformed input        402 insufficient funds   401 bad credential
    403 wrong party or role    404 not found / hidden   409 wrong state
    410 deadline passed
"""

from __future__ import annotations

from fastapi import Body, FastAPI, Header, Request
from fastapi.responses import JSONResponse

from .adjudication import AdjudicationError, NotArbiter
from .answerspec import InvalidSpec, Unparseable
from .eventlog import EventLogError
from .ledger import InsufficientFunds, LedgerError, NonPositiveAmount, UnknownAccount
from .protocol import (
    DeadlinePassed,
    EscrowMismatch,
    InvalidTerms,
    NotBuyer,
    NotSeller,
    ProtocolError,
    SelfDealing,
    UnknownParty,
    UnknownTransaction,
    WrongState,
)
from .service import (
    ExchangeService,
    Forbidden,
    NotFoundError,
    ServiceError,
    Unauthenticated,
)

# Ordered most-specific-first; the first matching class decides the code.
_STATUS_MAP: list[tuple[type, int]] = [
    (Unauthenticated, 401),
    (InsufficientFunds, 402),
    (NotArbiter, 403),
    (NotSeller, 403),
    (NotBuyer, 403),
    (SelfDealing, 403),
    (Forbidden, 403),
    (NotFoundError, 404),
    (UnknownTransaction, 404),
    (UnknownAccount, 404),
    (UnknownParty, 404),
    (WrongState, 409),
    (DeadlinePassed, 410),
    (InvalidSpec, 400),
    (Unparseable, 400),
    (InvalidTerms, 400),
    (NonPositiveAmount, 400),
    (AdjudicationError, 400),
    (ServiceError, 400),
    (EscrowMismatch, 500),
    (ProtocolError, 400),
    (EventLogError, 500),
    (LedgerError, 500),
]


def status_for(exc: Exception) -> int:
    for exc_type, code in _STATUS_MAP:
        if isinstance(exc, exc_type):
            return code
    return 500


# Exception base classes whose subclasses all map through status_for.
_HANDLED_BASES = (
    ServiceError,
    ProtocolError,
    LedgerError,
    InvalidSpec,
    Unparseable,
    AdjudicationError,
    EventLogError,
)


def create_app(service: ExchangeService) -> FastAPI:
    app = FastAPI(title="infomarket exchange", docs_url=None, redoc_url=None)
    app.state.service = service

    async def handle_error(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(
            status_code=status_for(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    for base in _HANDLED_BASES:
        app.add_exception_handler(base, handle_error)

    def body_field(payload: dict, key: str):
        try:
            return payload[key]
        except KeyError:
            raise ServiceError(f"missing request field {key!r}") from None

    @app.get("/healthz")
    async def healthz() -> dict:
        return {"ok": True, "events": len(service.log)}

    @app.post("/register")
    async def register(payload: dict = Body(...)) -> dict:
        return service.register(body_field(payload, "capabilities"))

    @app.post("/admin/fund")
    async def fund(
        payload: dict = Body(...), x_credential: str | None = Header(default=None)
    ) -> dict:
        return service.fund(
            x_credential,
            body_field(payload, "account_id"),
            body_field(payload, "amount"),
        )

    @app.post("/admin/tick")
    async def tick(
        payload: dict = Body(...), x_credential: str | None = Header(default=None)
    ) -> dict:
        return service.tick(x_credential, body_field(payload, "seconds"))

    @app.post("/questions")
    async def create_question(
        payload: dict = Body(...), x_credential: str | None = Header(default=None)
    ) -> dict:
        return service.create_question(
            x_credential,
            body_field(payload, "question_text"),
            body_field(payload, "spec"),
            body_field(payload, "terms"),
            payload.get("policy"),
        )

    @app.post("/questions/{txn_id}/post")
    async def post_question(
        txn_id: str, x_credential: str | None = Header(default=None)
    ) -> dict:
        return service.post_question(x_credential, txn_id)

    @app.post("/questions/{txn_id}/accept")
    async def accept_question(
        txn_id: str, x_credential: str | None = Header(default=None)
    ) -> dict:
        return service.accept_question(x_credential, txn_id)

    @app.post("/questions/{txn_id}/answer")
    async def submit_answer(
        txn_id: str,
        payload: dict = Body(...),
        x_credential: str | None = Header(default=None),
    ) -> dict:
        return service.submit_answer(x_credential, txn_id, body_field(payload, "answer"))

    @app.post("/questions/{txn_id}/evidence")
    async def submit_evidence(
        txn_id: str,
        payload: dict = Body(...),
        x_credential: str | None = Header(default=None),
    ) -> dict:
        return service.submit_evidence(x_credential, txn_id, body_field(payload, "body"))

    @app.post("/questions/{txn_id}/adjudicate")
    async def adjudicate(
        txn_id: str,
        payload: dict = Body(default={}),
        x_credential: str | None = Header(default=None),
    ) -> dict:
        return service.adjudicate(
            x_credential, txn_id, payload.get("verdict"), payload.get("rationale")
        )

    @app.post("/questions/{txn_id}/settle")
    async def settle(txn_id: str, x_credential: str | None = Header(default=None)) -> dict:
        return service.settle(x_credential, txn_id)

    @app.get("/questions/{txn_id}")
    async def get_question(
        txn_id: str, x_credential: str | None = Header(default=None)
    ) -> dict:
        return service.get_question(x_credential, txn_id)

    @app.get("/accounts/{account_id}")
    async def get_account(
        account_id: str, x_credential: str | None = Header(default=None)
    ) -> dict:
        return service.get_account(x_credential, account_id)

    return app
