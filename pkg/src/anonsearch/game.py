"""Two-stage query prediction game and its HTTP API.

A player first sees every transmitted term in send order and guesses the
hidden query. On a miss the distractors are removed and the player gets a
second guess from the related terms alone.
"""

from __future__ import annotations

import enum
import json
import logging
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from anonsearch.anonymise import DecomposedQuery, DecomposeParams, decompose
from anonsearch.corpus import InvertedIndex
from anonsearch.embed import EmbeddingStore
from anonsearch.reconstruct import evaluate
from anonsearch.seeding import make_rng

logger = logging.getLogger(__name__)

DEFAULT_RHO_THRESHOLD = 0.3
ORDER_STREAM, ROUND_STREAM, STAGE2_STREAM = 0, 1, 2


class Stage(str, enum.Enum):
    STAGE1 = "STAGE1"
    STAGE2 = "STAGE2"
    DONE = "DONE"


class Outcome(str, enum.Enum):
    PENDING = "PENDING"
    WIN_STAGE1 = "WIN_STAGE1"
    WIN_STAGE2 = "WIN_STAGE2"
    LOSS = "LOSS"


class GameError(Exception):
    code = "game_error"
    status = 400


class NotFoundError(GameError):
    code = "not_found"
    status = 404


class StateError(GameError):
    code = "invalid_state"
    status = 409


class GuessValidationError(GameError):
    code = "validation_error"
    status = 422


class NoEligibleQueryError(GameError):
    code = "no_eligible_query"
    status = 422


@dataclass
class GameRound:
    hidden_query: str
    decomposition: DecomposedQuery
    alpha: float
    rho: float
    stage: Stage = Stage.STAGE1
    outcome: Outcome = Outcome.PENDING
    stage2_terms: tuple[str, ...] = ()
    guesses: list[str] = field(default_factory=list)

    def visible_terms(self) -> list[str]:
        if self.stage is Stage.STAGE1:
            return list(self.decomposition.transmission_order)
        if self.stage is Stage.STAGE2:
            return list(self.stage2_terms)
        raise StateError("round is already resolved")


@dataclass
class GameSession:
    session_id: str
    rounds: list[GameRound]
    seed: int = 0
    wins: int = 0
    completed_rounds: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def count(self, outcome: Outcome) -> int:
        return sum(r.outcome is outcome for r in self.rounds)


def create_session(
    store: EmbeddingStore,
    index: InvertedIndex,
    round_count: int,
    params: DecomposeParams,
    query_pool: Sequence[str],
    seed: int,
    rho_threshold: float | None = DEFAULT_RHO_THRESHOLD,
    session_id: str | None = None,
) -> GameSession:
    """Sample hidden queries and precompute their decompositions.

    Queries are drawn without replacement in a seeded order, cycling through
    the pool again only once it is exhausted. Candidates whose
    reconstructability (l = 1) does not exceed ``rho_threshold`` are skipped.
    """
    if round_count < 1:
        raise ValueError("round_count must be positive")
    pool = sorted({q.lower() for q in query_pool})
    if not pool:
        raise ValueError("query pool is empty")
    rng = make_rng(seed, ORDER_STREAM)
    rounds: list[GameRound] = []
    attempt = 0
    while len(rounds) < round_count:
        accepted = 0
        for i in rng.permutation(len(pool)):
            q = pool[i]
            dq = decompose(store, q, params, make_rng(seed, ROUND_STREAM, attempt))
            attempt += 1
            metrics = evaluate(store, index, q, dq.related, dq.transmission_order, 1)
            rho = metrics.rho if metrics.rho is not None else 0.0
            if rho_threshold is not None and not rho > rho_threshold:
                continue
            rounds.append(GameRound(q, dq, metrics.alpha, rho))
            accepted += 1
            if len(rounds) == round_count:
                break
        if accepted == 0:
            if not rounds:
                raise NoEligibleQueryError(
                    f"no query in the pool has reconstructability above {rho_threshold}"
                )
            logger.warning("only %d of %d rounds could be filled", len(rounds), round_count)
            break
    return GameSession(session_id or uuid.uuid4().hex, rounds, seed)


def normalize_guess(guess: str) -> str:
    g = guess.strip().lower()
    if not g:
        raise GuessValidationError("guess must be a non-empty string")
    return g


def submit_guess(session: GameSession, round_index: int, guess: str) -> GameRound:
    """Apply one guess to a round and update the session tallies."""
    rnd = get_round(session, round_index)
    g = normalize_guess(guess)
    if rnd.stage is Stage.DONE:
        raise StateError(f"round {round_index} is already resolved")
    rnd.guesses.append(g)
    correct = g == rnd.hidden_query
    if rnd.stage is Stage.STAGE1 and not correct:
        related = rnd.decomposition.related
        perm = make_rng(session.seed, STAGE2_STREAM, round_index).permutation(len(related))
        rnd.stage2_terms = tuple(related[i] for i in perm)
        rnd.stage = Stage.STAGE2
        return rnd
    if correct:
        rnd.outcome = Outcome.WIN_STAGE1 if rnd.stage is Stage.STAGE1 else Outcome.WIN_STAGE2
        session.wins += 1
    else:
        rnd.outcome = Outcome.LOSS
    rnd.stage = Stage.DONE
    session.completed_rounds += 1
    return rnd


def get_round(session: GameSession, round_index: int) -> GameRound:
    if not 0 <= round_index < len(session.rounds):
        raise NotFoundError(f"round {round_index} does not exist")
    return session.rounds[round_index]


def session_stats(session: GameSession) -> dict:
    done = session.completed_rounds
    w1, w2 = session.count(Outcome.WIN_STAGE1), session.count(Outcome.WIN_STAGE2)
    return {
        "rounds": len(session.rounds),
        "completed": done,
        "wins": session.wins,
        "stage1_wins": w1,
        "stage2_wins": w2,
        "losses": session.count(Outcome.LOSS),
        "stage1_rate": w1 / done if done else None,
        "stage2_rate": w2 / done if done else None,
        "overall_rate": session.wins / done if done else None,
        "points": [
            {"alpha": r.alpha, "outcome": r.outcome.value}
            for r in session.rounds
            if r.stage is Stage.DONE
        ],
    }


class GameService:
    """In-memory sessions with an append-only JSON Lines event log.

    Operations on one session are serialised by that session's lock; the
    event log has a single writer guarded by the service lock.
    """

    def __init__(
        self,
        store: EmbeddingStore,
        index: InvertedIndex,
        query_pool: Sequence[str],
        rho_threshold: float | None = DEFAULT_RHO_THRESHOLD,
        pool_size: int | None = None,
        event_log: str | Path | None = None,
    ):
        self.store = store
        self.index = index
        self.query_pool = list(query_pool)
        self.rho_threshold = rho_threshold
        self.pool_size = pool_size
        self.event_log = Path(event_log) if event_log else None
        self._sessions: dict[str, GameSession] = {}
        self._lock = threading.Lock()

    def _log(self, event: dict) -> None:
        if self.event_log is None:
            return
        with self._lock, open(self.event_log, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _params(self, sigma: float, n: int, m: int, seed: int) -> DecomposeParams:
        kwargs = dict(n_related=n, m_distractors=m, sigma=sigma, seed=seed)
        if self.pool_size is not None:
            kwargs["pool_size"] = max(self.pool_size, m)
        return DecomposeParams(**kwargs)

    def create(self, rounds: int, sigma: float, n: int, m: int, seed: int,
               session_id: str | None = None, log: bool = True) -> GameSession:
        session = create_session(
            self.store, self.index, rounds, self._params(sigma, n, m, seed),
            self.query_pool, seed, self.rho_threshold, session_id,
        )
        with self._lock:
            self._sessions[session.session_id] = session
        if log:
            self._log({"event": "create", "session_id": session.session_id, "rounds": rounds,
                       "sigma": sigma, "n": n, "m": m, "seed": seed})
        return session

    def session(self, session_id: str) -> GameSession:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"session {session_id!r} does not exist")
        return session

    def view(self, session_id: str, round_index: int) -> dict:
        session = self.session(session_id)
        with session.lock:
            rnd = get_round(session, round_index)
            if rnd.stage is Stage.DONE:
                raise StateError(f"round {round_index} is already resolved")
            return {"stage": rnd.stage.value, "terms": rnd.visible_terms()}

    def guess(self, session_id: str, round_index: int, guess: str, log: bool = True) -> dict:
        session = self.session(session_id)
        with session.lock:
            rnd = submit_guess(session, round_index, guess)
            if log:
                self._log({"event": "guess", "session_id": session_id,
                           "round": round_index, "guess": guess})
            body = {"outcome": rnd.outcome.value, "next_stage": rnd.stage.value}
            if rnd.stage is Stage.DONE:
                body["query"] = rnd.hidden_query
            return body

    def stats(self, session_id: str) -> dict:
        session = self.session(session_id)
        with session.lock:
            return session_stats(session)

    def replay(self, path: str | Path) -> int:
        """Rebuild sessions from an event log; returns the number of events applied."""
        applied = 0
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                ev = json.loads(line)
                if ev["event"] == "create":
                    self.create(ev["rounds"], ev["sigma"], ev["n"], ev["m"], ev["seed"],
                                session_id=ev["session_id"], log=False)
                elif ev["event"] == "guess":
                    self.guess(ev["session_id"], ev["round"], ev["guess"], log=False)
                applied += 1
        return applied


class SessionRequest(BaseModel):
    rounds: int = Field(gt=0)
    sigma: float = Field(0.0, ge=0)
    n: int = Field(10, gt=0)
    m: int = Field(0, ge=0)
    seed: int = Field(0, ge=0)


class GuessRequest(BaseModel):
    guess: str


def create_app(service: GameService) -> FastAPI:
    """FastAPI application exposing the game over JSON."""
    app = FastAPI(title="anonsearch game")

    @app.exception_handler(GameError)
    async def _game_error(request: Request, exc: GameError):
        return JSONResponse({"code": exc.code, "message": str(exc)}, status_code=exc.status)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        msg = "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors())
        return JSONResponse({"code": "validation_error", "message": msg}, status_code=422)

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse({"code": "bad_request", "message": str(exc)}, status_code=400)

    @app.post("/api/sessions", status_code=201)
    def new_session(body: SessionRequest):
        session = service.create(body.rounds, body.sigma, body.n, body.m, body.seed)
        return {"session_id": session.session_id, "rounds": len(session.rounds)}

    @app.get("/api/sessions/{session_id}/rounds/{round_index}")
    def round_view(session_id: str, round_index: int):
        return service.view(session_id, round_index)

    @app.post("/api/sessions/{session_id}/rounds/{round_index}/guess")
    def guess(session_id: str, round_index: int, body: GuessRequest):
        return service.guess(session_id, round_index, body.guess)

    @app.get("/api/sessions/{session_id}/stats")
    def stats(session_id: str):
        return service.stats(session_id)

    return app
