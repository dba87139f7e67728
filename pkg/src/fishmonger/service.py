"""Live-play session service: the server is the committed seller.

A human (or remote program) plays the buyer over HTTP+JSON. During play the
responses expose only what a real buyer could observe at the stall: prices,
their own decisions, and the revenue they have paid. The branch labels, the
estimate trace, and the seed driving the randomization are withheld until
the session finishes, then revealed so the buyer can audit that the seller
really played the committed mixed strategy (frequencies per estimate level,
plus full offer-stream replay from the revealed seed).

Sessions persist as append-only JSONL event logs, one file per session.
Restarting the service replays every log and resumes each session with the
identical pending offer, because the offer stream is a pure function of
(seed, curve, decision sequence).
"""

from __future__ import annotations

import hashlib
import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from .curves import RewardCurve, make_curve
from .engine import branch_frequency_audit
from .errors import ConfigurationError, CurveValidityError, FishmongerError
from .mechanism import Branch, MechanismState, PriceOffer, apply_decision, propose

DEFAULT_ROUND_CAP = 200
MAX_ROUND_CAP = 100_000
MAX_SEED = 2**63

MECHANISM_DESCRIPTION = (
    "Each round the seller draws one of three price kinds from the committed "
    "mix at the current estimate e: with probability 1-p(e) an exploration "
    "price uniform on [e, e+1] (accepting it moves the estimate up to that "
    "price); with probability R(e)/e a price of exactly 0; with the remaining "
    "probability p(e)-R(e)/e a confirmation price equal to e (refusing it "
    "strictly lowers the estimate). p is the disclosed acceptance curve and "
    "R its integral from 0; at e=0 the draw is always an exploration price. "
    "The per-session seed is committed by hash now and revealed at finish."
)


class CreateSessionBody(BaseModel):
    curve: dict | None = None
    seed: int | None = None
    round_cap: int | None = None


class DecisionBody(BaseModel):
    accept: bool
    token: str | None = None


class ServiceError(FishmongerError):
    """Session-API failure with a machine-readable code and HTTP status."""

    def __init__(self, code: str, message: str, http_status: int):
        super().__init__(message)
        self.code = code
        self.http_status = http_status


def unknown_session(session_id: str) -> ServiceError:
    return ServiceError("unknown-session", f"no session {session_id!r}", 404)


def _commitment(seed: int, nonce: str) -> str:
    return hashlib.sha256(f"{seed}:{nonce}".encode()).hexdigest()


@dataclass
class SessionRecord:
    """One live game: mechanism state plus the audit trail."""

    session_id: str
    curve_spec: dict
    seed: int
    nonce: str
    round_cap: int
    reward: RewardCurve
    rng: np.random.Generator
    state: MechanismState = field(default_factory=MechanismState)
    status: str = "awaiting-decision"
    revenue_total: float = 0.0
    token_results: dict[str, dict] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def public_stats(self) -> dict:
        """Buyer-observable aggregates; plain running sums a client can mirror."""
        n = self.state.rounds_played
        return {
            "rounds_played": n,
            "accept_count": self.state.accept_count,
            "revenue_total": self.revenue_total,
            "revenue_avg": self.revenue_total / n if n else 0.0,
        }


class SessionStore:
    """All sessions, their locks, and the JSONL persistence underneath."""

    def __init__(self, log_dir: str | Path):
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, SessionRecord] = {}
        self._create_lock = threading.Lock()
        for log_path in sorted(self.log_dir.glob("*.jsonl")):
            record = self._recover(log_path)
            self._sessions[record.session_id] = record

    # -- persistence ------------------------------------------------------

    def _log_path(self, session_id: str) -> Path:
        return self.log_dir / f"{session_id}.jsonl"

    def _append(self, session_id: str, event: dict) -> None:
        line = json.dumps({"ts": time.time(), **event}, sort_keys=True)
        with open(self._log_path(session_id), "a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def _recover(self, log_path: Path) -> SessionRecord:
        """Rebuild a session by replaying its event log through the mechanism.

        Offers are regenerated from the seed, not read back, and compared to
        the logged ones; a mismatch means the log was edited or the engine
        changed, and either must be surfaced, not papered over.
        """
        events = []
        with open(log_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    events.append(json.loads(line))
        if not events or events[0].get("event") != "created":
            raise ConfigurationError(f"corrupt session log {log_path}: no creation event")
        head = events[0]
        record = SessionRecord(
            session_id=head["session_id"],
            curve_spec=head["curve"],
            seed=head["seed"],
            nonce=head["nonce"],
            round_cap=head["round_cap"],
            reward=RewardCurve(make_curve(head["curve"])),
            rng=np.random.default_rng(head["seed"]),
        )
        awaiting_next: str | None = None  # token whose response lacks its next offer
        for event in events[1:]:
            kind = event.get("event")
            if kind == "offer":
                offer = propose(record.state, record.reward, record.rng)
                if offer.price != event["price"] or offer.branch.value != event["branch"]:
                    raise ConfigurationError(
                        f"session log {log_path} does not replay: round {offer.round} "
                        f"regenerated ({offer.price!r}, {offer.branch.value}) vs logged "
                        f"({event['price']!r}, {event['branch']})"
                    )
                if awaiting_next is not None:
                    record.token_results[awaiting_next]["next"] = {
                        "round": offer.round, "price": offer.price}
                    awaiting_next = None
            elif kind == "decision":
                token = event["token"]
                result = self._settle(record, bool(event["accept"]))
                record.token_results[token] = {
                    **result, "session_id": record.session_id,
                    "status": "awaiting-decision", "next": None,
                }
                awaiting_next = token
            elif kind == "finished":
                record.status = "finished"
                if awaiting_next is not None:
                    record.token_results[awaiting_next]["status"] = "finished"
                    awaiting_next = None
            else:
                raise ConfigurationError(f"corrupt session log {log_path}: event {kind!r}")
        if record.status != "finished" and record.state.pending is None:
            # the log ended between a decision and its follow-up offer
            # (interrupted mid-transition); regenerate the offer it owed
            offer = self._advance(record)
            if awaiting_next is not None:
                if offer is None:
                    record.token_results[awaiting_next]["status"] = "finished"
                else:
                    record.token_results[awaiting_next]["next"] = {
                        "round": offer.round, "price": offer.price}
        return record

    # -- core transitions (shared by HTTP handlers and in-process callers) --

    def _settle(self, record: SessionRecord, accept: bool) -> dict:
        """Apply one decision to the pending offer and build the response."""
        offer = record.state.pending
        if offer is None:
            raise ServiceError("no-pending-offer", "no offer awaiting a decision", 409)
        apply_decision(record.state, accept)
        if accept:
            record.revenue_total += offer.price
        return {
            "round": offer.round,
            "price": offer.price,
            "accepted": accept,
            "stats": record.public_stats(),
        }

    def _offer_payload(self, record: SessionRecord) -> dict:
        offer = record.state.pending
        assert offer is not None
        return {"round": offer.round, "price": offer.price}

    def _advance(self, record: SessionRecord) -> PriceOffer | None:
        """Propose the next offer, or finish when the cap is reached."""
        if record.state.rounds_played >= record.round_cap:
            record.status = "finished"
            self._append(record.session_id, {"event": "finished", "reason": "round-cap"})
            return None
        offer = propose(record.state, record.reward, record.rng)
        self._append(record.session_id, {
            "event": "offer", "round": offer.round, "price": offer.price,
            "branch": offer.branch.value,
            "estimate_before": record.state.estimate,
        })
        return offer

    def _get(self, session_id: str) -> SessionRecord:
        record = self._sessions.get(session_id)
        if record is None:
            raise unknown_session(session_id)
        return record

    # -- public API ---------------------------------------------------------

    def create(self, curve_spec: dict | None = None, seed: int | None = None,
               round_cap: int | None = None) -> dict:
        spec = dict(curve_spec) if curve_spec else {"family": "rational"}
        try:
            curve = make_curve(spec)  # strict validation before anything persists
        except (ConfigurationError, CurveValidityError) as exc:
            raise ServiceError("invalid-curve", str(exc), 400)
        if seed is None:
            seed = secrets.randbelow(MAX_SEED)
        if not (0 <= seed < MAX_SEED):
            raise ServiceError("invalid-seed", f"seed must be in [0, 2^63), got {seed}", 400)
        cap = DEFAULT_ROUND_CAP if round_cap is None else round_cap
        if not (1 <= cap <= MAX_ROUND_CAP):
            raise ServiceError("invalid-round-cap",
                               f"round cap must be in [1, {MAX_ROUND_CAP}], got {cap}", 400)

        session_id = secrets.token_hex(16)
        nonce = secrets.token_hex(16)
        record = SessionRecord(
            session_id=session_id, curve_spec=curve.spec(), seed=seed, nonce=nonce,
            round_cap=cap, reward=RewardCurve(curve), rng=np.random.default_rng(seed),
        )
        self._append(session_id, {
            "event": "created", "session_id": session_id, "curve": curve.spec(),
            "seed": seed, "nonce": nonce, "round_cap": cap,
        })
        offer = self._advance(record)
        assert offer is not None  # cap >= 1, so the first offer always exists
        with self._create_lock:
            self._sessions[session_id] = record
        return {
            "session_id": session_id,
            "status": record.status,
            "commitment": {
                "curve": curve.spec(),
                "mechanism": MECHANISM_DESCRIPTION,
                "seed_commitment": _commitment(seed, nonce),
                "round_cap": cap,
            },
            "offer": self._offer_payload(record),
            "stats": record.public_stats(),
        }

    def offer_view(self, session_id: str) -> dict:
        record = self._get(session_id)
        with record.lock:
            if record.status == "finished":
                raise ServiceError("session-finished", "session is finished", 409)
            return {
                "session_id": session_id,
                "status": record.status,
                "offer": self._offer_payload(record),
                "stats": record.public_stats(),
                "round_cap": record.round_cap,
            }

    def decide(self, session_id: str, accept: bool, token: str | None) -> dict:
        record = self._get(session_id)
        with record.lock:
            if token is None or token == "":
                raise ServiceError("missing-token",
                                   "a decision needs an idempotency token", 409)
            repeat = record.token_results.get(token)
            if repeat is not None:
                return repeat
            if record.status == "finished":
                raise ServiceError("session-finished", "session is finished", 409)
            self._append(session_id, {"event": "decision",
                                      "round": record.state.pending.round,
                                      "accept": bool(accept), "token": token})
            result = self._settle(record, bool(accept))
            offer = self._advance(record)
            response = {
                **result,
                "session_id": session_id,
                "status": record.status,
                "next": None if offer is None else self._offer_payload(record),
            }
            record.token_results[token] = response
            return response

    def finish(self, session_id: str) -> dict:
        record = self._get(session_id)
        with record.lock:
            if record.status != "finished":
                record.status = "finished"
                self._append(session_id, {"event": "finished", "reason": "explicit"})
            return {
                "session_id": session_id,
                "status": "finished",
                "rounds_played": record.state.rounds_played,
                "stats": record.public_stats(),
            }

    def history_view(self, session_id: str) -> dict:
        """Round-by-round table; branch labels and estimates only after finish."""
        record = self._get(session_id)
        with record.lock:
            finished = record.status == "finished"
            rounds = []
            for i in range(record.state.rounds_played):
                row = {
                    "round": i,
                    "price": record.state.prices[i],
                    "accepted": bool(record.state.decisions[i]),
                }
                if finished:
                    row["branch"] = record.state.branches[i].value
                    row["estimate_before"] = record.state.estimates_before[i]
                rounds.append(row)
            return {
                "session_id": session_id,
                "status": record.status,
                "rounds": rounds,
                "stats": record.public_stats(),
            }

    def audit_view(self, session_id: str) -> dict:
        """Post-game revelation: seed, nonce, branch labels, estimate trace,
        and per-estimate-level frequency verdict against the committed mix."""
        record = self._get(session_id)
        with record.lock:
            if record.status != "finished":
                raise ServiceError("session-not-finished",
                                   "finish the session before auditing", 403)
            state = record.state
            bands, verdict = branch_frequency_audit(
                state.branches, state.estimates_before, record.reward)
            rounds = [
                {
                    "round": i,
                    "price": state.prices[i],
                    "accepted": bool(state.decisions[i]),
                    "branch": state.branches[i].value,
                    "estimate_before": state.estimates_before[i],
                }
                for i in range(state.rounds_played)
            ]
            return {
                "session_id": session_id,
                "curve": record.curve_spec,
                "seed": record.seed,
                "nonce": record.nonce,
                "seed_commitment": _commitment(record.seed, record.nonce),
                "rounds": rounds,
                "bands": bands,
                "verdict": verdict,
                "stats": record.public_stats(),
            }


def replay_offers(curve_spec: dict, seed: int,
                  decisions: list[bool]) -> list[dict]:
    """Regenerate the offer stream a session must have produced.

    Anyone holding the revealed seed and their own decision record can run
    this and compare against the offers they actually received.
    """
    reward = RewardCurve(make_curve(curve_spec))
    rng = np.random.default_rng(seed)
    state = MechanismState()
    offers = []
    for accept in decisions:
        estimate_before = state.estimate
        offer = propose(state, reward, rng)
        offers.append({"round": offer.round, "price": offer.price,
                       "branch": offer.branch.value,
                       "estimate_before": estimate_before})
        apply_decision(state, bool(accept))
    return offers


def audit_log_file(log_path: str | Path) -> dict:
    """Offline audit of a session event log: replay equality + frequency bands."""
    events = []
    with open(log_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(json.loads(line))
    if not events or events[0].get("event") != "created":
        raise ConfigurationError(f"{log_path}: not a session log")
    head = events[0]
    offers = [e for e in events if e.get("event") == "offer"]
    decisions = [bool(e["accept"]) for e in events if e.get("event") == "decision"]
    replayed = replay_offers(head["curve"], head["seed"], decisions)
    replay_match = all(
        logged["price"] == regen["price"] and logged["branch"] == regen["branch"]
        for logged, regen in zip(offers, replayed)
    ) and len(offers) >= len(replayed)

    reward = RewardCurve(make_curve(head["curve"]))
    branches = [Branch(o["branch"]) for o in offers[:len(decisions)]]
    estimates = [o["estimate_before"] for o in offers[:len(decisions)]]
    bands, verdict = branch_frequency_audit(branches, estimates, reward)
    return {
        "session_id": head["session_id"],
        "rounds": len(decisions),
        "replay_match": replay_match,
        "bands": bands,
        "verdict": verdict,
    }


def create_app(log_dir: str | Path, store: SessionStore | None = None):
    """FastAPI application wired to a SessionStore (shared store injectable)."""
    from fastapi import FastAPI, HTTPException
    from fastapi.middleware.cors import CORSMiddleware

    app = FastAPI(title="fishmonger play service", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    sessions = store if store is not None else SessionStore(log_dir)
    app.state.store = sessions

    def _run(fn, *args):
        try:
            return fn(*args)
        except ServiceError as exc:
            raise HTTPException(status_code=exc.http_status,
                                detail={"code": exc.code, "message": str(exc)})

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        return _run(sessions.create, body.curve, body.seed, body.round_cap)

    @app.get("/sessions/{session_id}/offer")
    def get_offer(session_id: str):
        return _run(sessions.offer_view, session_id)

    @app.post("/sessions/{session_id}/decision")
    def post_decision(session_id: str, body: DecisionBody):
        return _run(sessions.decide, session_id, body.accept, body.token)

    @app.post("/sessions/{session_id}/finish")
    def post_finish(session_id: str):
        return _run(sessions.finish, session_id)

    @app.get("/sessions/{session_id}/audit")
    def get_audit(session_id: str):
        return _run(sessions.audit_view, session_id)

    @app.get("/sessions/{session_id}/history")
    def get_history(session_id: str):
        return _run(sessions.history_view, session_id)

    return app
