"""Command line entry points: serve, replay, simulate, demo."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path

from .eventlog import EventLog
from .ledger import LedgerEntry
from .protocol import Terms
from .service import ExchangeService, ServiceConfig
from .simulation import BuyerStrategy, SimConfig, run_simulation

DAY = 86400

DEFAULT_TERMS = {
    "price": 200000,       # $2,000.00 per question
    "seller_stake": 100000,
    "buyer_deposit": 40000,
    "buyer_fee": 5000,
    "seller_fee": 5000,
    "answer_deadline": 3 * DAY,
    "evidence_deadline": 10 * DAY,
}


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import create_app

    config = ServiceConfig.parse(Path(args.config).read_text(encoding="utf-8"))
    log_path = None
    if config.data_dir:
        log_path = Path(config.data_dir) / "events.jsonl"
    if log_path is not None and log_path.exists() and log_path.stat().st_size > 0:
        service = ExchangeService.recover(log_path, config)
        print(f"recovered {len(service.log)} events from {log_path}")
        if service.admin_credential:
            print(f"admin credential: {service.admin_credential}")
        else:
            print("admin credential: set admin_credential in the config to reuse one")
    else:
        service = ExchangeService.fresh(config, log_path)
        print(f"admin credential: {service.admin_credential}")
    host, _, port = config.listen_address.partition(":")
    app = create_app(service)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or "8100"), log_level="warning")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    events = EventLog.read(Path(args.log))
    service = ExchangeService.replay_log(events)
    states: dict[str, int] = {}
    for txn in service.exchange.transactions.values():
        states[txn.state.value] = states.get(txn.state.value, 0) + 1
    snapshot = service.serialize_state()
    print(f"events:        {len(events)}")
    print(f"parties:       {len(service.parties)}")
    print(f"transactions:  {len(service.exchange.transactions)}")
    for state, count in sorted(states.items()):
        print(f"  {state}: {count}")
    print(f"issued:        {service.ledger.total_issued}")
    print(f"total supply:  {service.ledger.total_supply()}")
    print(f"state sha256:  {hashlib.sha256(snapshot).hexdigest()}")
    if args.dump_state:
        Path(args.dump_state).write_bytes(snapshot)
        print(f"state written: {args.dump_state}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    terms_dict = dict(DEFAULT_TERMS)
    if args.terms:
        terms_dict.update(json.loads(Path(args.terms).read_text(encoding="utf-8")))
    terms = Terms.from_dict(terms_dict)
    grid = tuple(Fraction(part.strip()) for part in args.grid.split(",") if part.strip())
    config = SimConfig(
        terms=terms,
        grid=grid,
        trials=args.trials,
        seed=args.seed,
        buyer=BuyerStrategy(evidence_cost=args.evidence_cost),
    )
    report = run_simulation(config)
    payload = report.to_json()
    if args.out:
        Path(args.out).write_bytes(payload)
        print(f"report written: {args.out}")
    else:
        sys.stdout.write(payload.decode("utf-8") + "\n")
    print(f"{'p':>6}  {'mean seller net':>16}  {'stderr':>10}  participate")
    for point in report.points:
        print(
            f"{float(point.p):>6.2f}  {point.seller_net_mean:>16.2f}  "
            f"{point.seller_net_stderr:>10.2f}  {point.would_participate}"
        )
    print(f"break-even closed form: {report.break_even_closed_form} "
          f"({float(report.break_even_closed_form):.4f})")
    print(f"break-even estimate:    {report.break_even_estimate}")
    print(f"conservation: issued={report.issued_total} "
          f"final={report.final_balance_total} ok={report.conserved}")
    return 0 if report.conserved else 1


def _per_txn_net(entries: tuple[LedgerEntry, ...], txn_id: str, account: str) -> int:
    net = 0
    for entry in entries:
        if entry.txn != txn_id:
            continue
        if entry.credit == account:
            net += entry.amount
        if entry.debit == account:
            net -= entry.amount
    return net


def cmd_demo(args: argparse.Namespace) -> int:
    """Desk-scale scenario: a buyer checks out a result with a handful of
    $2,000 questions over ten simulated days, one of each terminal flavor."""
    service = ExchangeService.fresh(ServiceConfig(clock_mode="simulated"))
    admin = service.admin_credential
    buyer = service.register(["buy"])
    seller_a = service.register(["sell"])
    seller_b = service.register(["sell"])

    terms = dict(DEFAULT_TERMS)
    per_question = terms["price"] + terms["buyer_deposit"] + terms["buyer_fee"]
    service.fund(admin, buyer["account_id"], 5 * per_question)
    stake = terms["seller_stake"] + terms["seller_fee"]
    service.fund(admin, seller_a["account_id"], 3 * stake)
    service.fund(admin, seller_b["account_id"], 2 * stake)

    spec = {"variant": "Enumerated", "options": ["compound-17", "compound-42", "none"]}
    questions = []
    for i in range(5):
        view = service.create_question(
            buyer["credential"],
            f"Does candidate {i + 1} bind the target?",
            spec,
            terms,
        )
        service.post_question(buyer["credential"], view["id"])
        questions.append(view["id"])

    q_correct, q_incorrect, q_insufficient, q_rejected, q_expired = questions
    for txn_id in (q_correct, q_incorrect, q_insufficient):
        service.accept_question(seller_a["credential"], txn_id)
    for txn_id in (q_rejected, q_expired):
        service.accept_question(seller_b["credential"], txn_id)

    # Day 1: answers come in. One is outside the allowed set and is rejected
    # on the spot; one question is never answered at all.
    service.tick(admin, DAY)
    for txn_id in (q_correct, q_incorrect, q_insufficient):
        service.submit_answer(seller_a["credential"], txn_id, "compound-17")
    service.submit_answer(seller_b["credential"], q_rejected, "compound-99")

    # Day 4: past the answer deadline; the unanswered question expires.
    service.tick(admin, 3 * DAY)

    # The buyer runs the experiments and submits attestations.
    attest = lambda outcome: json.dumps(
        {"claimed_outcome": outcome, "supporting_note": "assay run, see lab book"}
    )
    service.submit_evidence(buyer["credential"], q_correct, attest("compound-17"))
    service.submit_evidence(buyer["credential"], q_incorrect, attest("none"))
    service.submit_evidence(buyer["credential"], q_insufficient, "corrupted attachment")
    for txn_id in (q_correct, q_incorrect, q_insufficient):
        service.adjudicate(buyer["credential"], txn_id)
    for txn_id in questions:
        service.settle(buyer["credential"], txn_id)

    # Settlement summary, every number read back off the ledger.
    entries = service.ledger.entries
    accounts = {
        q_correct: seller_a,
        q_incorrect: seller_a,
        q_insufficient: seller_a,
        q_rejected: seller_b,
        q_expired: seller_b,
    }
    print(f"{'question':<10} {'settled from':<20} {'verdict':<22} "
          f"{'seller net':>12} {'buyer net':>12} {'fees':>8} {'sink':>8}")
    totals = {"seller": 0, "buyer": 0, "fees": 0, "sink": 0}
    for txn_id in questions:
        txn = service.exchange.get(txn_id)
        decision = service.decisions.get(txn_id)
        seller_net = _per_txn_net(entries, txn_id, accounts[txn_id]["account_id"])
        buyer_net = _per_txn_net(entries, txn_id, buyer["account_id"])
        fee_net = _per_txn_net(entries, txn_id, "exchange_fee")
        sink_net = _per_txn_net(entries, txn_id, "sink")
        totals["seller"] += seller_net
        totals["buyer"] += buyer_net
        totals["fees"] += fee_net
        totals["sink"] += sink_net
        verdict = decision.verdict.value if decision else "-"
        print(f"{txn_id:<10} {txn.settled_from.value:<20} {verdict:<22} "
              f"{seller_net:>+12} {buyer_net:>+12} {fee_net:>8} {sink_net:>8}")
    print(f"{'totals':<10} {'':<20} {'':<22} "
          f"{totals['seller']:>+12} {totals['buyer']:>+12} "
          f"{totals['fees']:>8} {totals['sink']:>8}")

    cross_total = sum(totals.values())
    issued = service.ledger.total_issued
    supply = service.ledger.total_supply()
    prices_total = len(questions) * terms["price"] / 100
    print(f"questions asked: {len(questions)} at $2,000.00 each "
          f"(${prices_total:,.2f} in prices) over 10 simulated days")
    print(f"buyer net spend: ${-totals['buyer'] / 100:,.2f} "
          "(outcome-dependent: deposits returned, bad answers refunded)")
    print(f"ledger: issued={issued} final={supply} net-sum={cross_total}")

    replayed = ExchangeService.replay_log(list(service.log.events))
    replay_ok = replayed.serialize_state() == service.serialize_state()
    print(f"event replay reproduces state: {replay_ok}")

    if cross_total == 0 and issued == supply and replay_ok:
        print("RECONCILED: settlement totals match the ledger exactly")
        return 0
    print("MISMATCH: settlement totals do not reconcile")
    return 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="infomarket",
        description="Escrow-brokered question/answer market",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the exchange HTTP service")
    p_serve.add_argument("--config", required=True, help="path to key=value config file")
    p_serve.set_defaults(func=cmd_serve)

    p_replay = sub.add_parser("replay", help="rebuild state from an event log")
    p_replay.add_argument("--log", required=True, help="path to events.jsonl")
    p_replay.add_argument("--dump-state", default=None, help="write state JSON here")
    p_replay.set_defaults(func=cmd_replay)

    p_sim = sub.add_parser("simulate", help="Monte-Carlo incentive simulation")
    p_sim.add_argument("--terms", default=None, help="JSON file of terms overrides")
    p_sim.add_argument("--grid", default="0.0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0",
                       help="comma-separated accuracy probabilities")
    p_sim.add_argument("--trials", type=int, default=10000, help="trials per grid point")
    p_sim.add_argument("--seed", type=int, default=20160331, help="simulation seed")
    p_sim.add_argument("--evidence-cost", type=int, default=0,
                       help="buyer's out-of-band cost of producing evidence")
    p_sim.add_argument("--out", default=None, help="write the JSON report here")
    p_sim.set_defaults(func=cmd_simulate)

    p_demo = sub.add_parser("demo", help="ten-day five-question walkthrough")
    p_demo.set_defaults(func=cmd_demo)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
