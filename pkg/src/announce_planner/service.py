"""Advisor HTTP service: session-scoped belief tracking and recommendations.

A session walks one project week by week. Each week the client submits
the team's completion estimate (and whether the project finished); the
service updates the belief, returns the policy's recommended
announcement with what-if values, and then records whatever
announcement the human actually made. The recorded announcement, not
the recommendation, feeds the next belief update because replanning
delays hinge on what was actually communicated.

Sessions live in memory; an optional snapshot file persists them across
restarts. Requests on one session are serialized, distinct sessions
proceed in parallel.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from contextlib import asynccontextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import belief as bf
from .cli import POLICY_NAMES, ON_DEMAND_PB_ITERATIONS, ON_DEMAND_PB_PRECISION
from .model import (
    ConfigError,
    ObservableState,
    ProblemConfig,
    config_from_dict,
    preset_config,
    PRESET_HORIZONS,
)
from .policies import evaluate
from .solvers import (
    ConfigMismatch,
    FormatError,
    Policy,
    baseline_policy,
    load_policy,
    solve_point_based,
    solve_qmdp,
)

logger = logging.getLogger(__name__)

QMDP_ON_DEMAND_MAX_STATES = 60_000
PB_ON_DEMAND_MAX_STATES = 5_000
WHAT_IF_WINDOW = 5


class CreateSessionRequest(BaseModel):
    policy: str
    config: dict | None = None
    config_name: str | None = None


class ObserveRequest(BaseModel):
    estimate: int
    completed: bool = False


class AnnounceRequest(BaseModel):
    announce: int


@dataclass
class Session:
    id: str
    config: ProblemConfig
    policy_name: str
    policy: Policy
    belief: bf.Belief
    clock: int = 0
    status: str = "active"                  # active | completed
    phase: str = "awaiting_observation"     # awaiting_observation | awaiting_announcement
    observations: list[int] = field(default_factory=list)
    completed_flags: list[bool] = field(default_factory=list)
    announcements: list[int] = field(default_factory=list)
    last_recommendation: int | None = None
    pending_completed: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def view(self) -> dict:
        return {
            "id": self.id,
            "status": self.status,
            "phase": self.phase,
            "clock": self.clock,
            "policy": self.policy_name,
            "config": asdict(self.config),
            "prev_announce": self.announcements[-1] if self.announcements else None,
            "history": {
                "observations": list(self.observations),
                "completed_flags": list(self.completed_flags),
                "announcements": list(self.announcements),
            },
            "belief": self.belief.to_pairs(),
            "recommendation": self.last_recommendation,
        }


def _what_if(session: Session) -> list[dict]:
    """Expected value of the candidate announcements near the belief mode."""
    cfg = session.config
    b = session.belief
    mode = bf.most_likely_completion(b)
    candidates = sorted(range(cfg.t_min, cfg.t_max + 1), key=lambda a: (abs(a - mode), a))
    chosen = set(candidates[:WHAT_IF_WINDOW])
    prev = session.announcements[-1] if session.announcements else None
    if prev is not None:
        chosen.add(prev)
    scores = session.policy.action_scores(b.observable, b)
    out = []
    for a in sorted(chosen):
        value = None
        if scores is not None:
            value = float(scores[a - cfg.t_min])
        out.append({
            "action": a,
            "expected_value": value,
            "keep_previous": prev is not None and a == prev,
        })
    return out


class AdvisorState:
    def __init__(self, policies_dir: str | None = None, snapshot_path: str | None = None,
                 qmdp_max_states: int = QMDP_ON_DEMAND_MAX_STATES,
                 pb_max_states: int = PB_ON_DEMAND_MAX_STATES):
        self.sessions: dict[str, Session] = {}
        self.sessions_lock = threading.Lock()
        self.solve_lock = threading.Lock()
        self.solved_cache: dict[tuple[str, str], Policy] = {}
        self.policies_dir = Path(policies_dir) if policies_dir else None
        self.snapshot_path = Path(snapshot_path) if snapshot_path else None
        self.qmdp_max_states = qmdp_max_states
        self.pb_max_states = pb_max_states
        self.precomputed = self._scan_policies()

    def _scan_policies(self) -> list[dict]:
        found = []
        if self.policies_dir and self.policies_dir.is_dir():
            preset_fps = {preset_config(name).fingerprint(): name for name in PRESET_HORIZONS}
            for path in sorted(self.policies_dir.glob("*.json")):
                try:
                    with open(path, encoding="utf-8") as fh:
                        envelope = json.load(fh)
                    kind = envelope["kind"]
                    fingerprint = envelope["config_fingerprint"]
                except (OSError, KeyError, TypeError, json.JSONDecodeError):
                    logger.warning("skipping unreadable policy file %s", path)
                    continue
                found.append({
                    "file": path.name,
                    "kind": kind,
                    "config_fingerprint": fingerprint,
                    "preset": preset_fps.get(fingerprint),
                })
        return found

    def resolve_policy(self, name: str, cfg: ProblemConfig) -> Policy:
        kind = POLICY_NAMES.get(name)
        if kind is None:
            raise HTTPException(400, f"unknown policy {name!r}; choose from {sorted(POLICY_NAMES)}")
        if kind in ("last_observed", "most_likely"):
            return baseline_policy(kind, cfg)
        fingerprint = cfg.fingerprint()
        with self.solve_lock:
            cached = self.solved_cache.get((kind, fingerprint))
            if cached is not None:
                return cached
            for entry in self.precomputed:
                if entry["kind"] == kind and entry["config_fingerprint"] == fingerprint:
                    policy = load_policy(self.policies_dir / entry["file"], cfg)
                    self.solved_cache[(kind, fingerprint)] = policy
                    return policy
            n_states = (cfg.t_max + 1) * cfg.n_completion ** 2
            limit = self.qmdp_max_states if kind == "qmdp" else self.pb_max_states
            if n_states > limit:
                raise HTTPException(
                    409,
                    f"no precomputed {name} policy for this configuration and its {n_states} "
                    f"states exceed the on-demand limit of {limit}; solve it offline with "
                    f"'announce-planner solve --solver {name}' and restart with --policies-dir",
                )
            if kind == "qmdp":
                policy, _ = solve_qmdp(cfg)
            else:
                policy, _ = solve_point_based(cfg, precision=ON_DEMAND_PB_PRECISION,
                                              time_budget=120.0,
                                              max_iterations=ON_DEMAND_PB_ITERATIONS)
            self.solved_cache[(kind, fingerprint)] = policy
            return policy

    def get_session(self, session_id: str) -> Session:
        with self.sessions_lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"session {session_id!r} not found")
        return session

    # -- snapshotting --------------------------------------------------

    def save_snapshot(self) -> None:
        if self.snapshot_path is None:
            return
        with self.sessions_lock:
            sessions = list(self.sessions.values())
        payload = []
        for s in sessions:
            with s.lock:
                payload.append({
                    "id": s.id,
                    "config": asdict(s.config),
                    "policy": s.policy_name,
                    "clock": s.clock,
                    "status": s.status,
                    "phase": s.phase,
                    "observations": s.observations,
                    "completed_flags": s.completed_flags,
                    "announcements": s.announcements,
                    "last_recommendation": s.last_recommendation,
                    "pending_completed": s.pending_completed,
                    "belief_observable": list(s.belief.observable),
                    "belief_mass": [float(m) for m in s.belief.mass],
                })
        with open(self.snapshot_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
        logger.info("wrote %d sessions to %s", len(payload), self.snapshot_path)

    def load_snapshot(self) -> None:
        if self.snapshot_path is None or not self.snapshot_path.exists():
            return
        try:
            with open(self.snapshot_path, encoding="utf-8") as fh:
                payload = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            logger.warning("could not read snapshot %s: %s", self.snapshot_path, exc)
            return
        for entry in payload:
            try:
                cfg = config_from_dict(entry["config"])
                policy = self.resolve_policy(entry["policy"], cfg)
                t, prev = entry["belief_observable"]
                belief = bf.Belief(ObservableState(int(t), int(prev)),
                                   np.asarray(entry["belief_mass"], dtype=float), cfg.t_min)
                session = Session(
                    id=entry["id"], config=cfg, policy_name=entry["policy"], policy=policy,
                    belief=belief, clock=entry["clock"], status=entry["status"],
                    phase=entry["phase"], observations=list(entry["observations"]),
                    completed_flags=list(entry["completed_flags"]),
                    announcements=list(entry["announcements"]),
                    last_recommendation=entry["last_recommendation"],
                    pending_completed=entry["pending_completed"],
                )
            except (KeyError, ValueError, TypeError, HTTPException) as exc:
                logger.warning("skipping snapshot session: %s", exc)
                continue
            with self.sessions_lock:
                self.sessions[session.id] = session
        logger.info("restored %d sessions", len(self.sessions))


def create_app(policies_dir: str | None = None, ui_dir: str | None = None,
               snapshot_path: str | None = None,
               qmdp_max_states: int = QMDP_ON_DEMAND_MAX_STATES,
               pb_max_states: int = PB_ON_DEMAND_MAX_STATES) -> FastAPI:
    state = AdvisorState(policies_dir=policies_dir, snapshot_path=snapshot_path,
                         qmdp_max_states=qmdp_max_states, pb_max_states=pb_max_states)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        state.load_snapshot()
        yield
        state.save_snapshot()

    app = FastAPI(title="announce-planner advisor", lifespan=lifespan)
    app.state.advisor = state

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/policies")
    def policies():
        return {
            "policies": state.precomputed,
            "presets": {name: dict(zip(("t_min", "t_max"), PRESET_HORIZONS[name]))
                        for name in PRESET_HORIZONS},
        }

    @app.post("/sessions")
    def create_session(request: CreateSessionRequest):
        if (request.config is None) == (request.config_name is None):
            raise HTTPException(400, "provide exactly one of config or config_name")
        try:
            if request.config_name is not None:
                cfg = preset_config(request.config_name)
            else:
                cfg = config_from_dict(request.config)
        except ConfigError as exc:
            raise HTTPException(400, str(exc))
        try:
            policy = state.resolve_policy(request.policy, cfg)
        except (ConfigMismatch, FormatError) as exc:
            raise HTTPException(500, f"precomputed policy file is unusable: {exc}")
        session = Session(
            id=uuid.uuid4().hex,
            config=cfg,
            policy_name=request.policy,
            policy=policy,
            belief=bf.initial_belief(cfg),
        )
        with state.sessions_lock:
            state.sessions[session.id] = session
        return {"id": session.id}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = state.get_session(session_id)
        with session.lock:
            return session.view()

    @app.post("/sessions/{session_id}/observe")
    def observe(session_id: str, request: ObserveRequest):
        session = state.get_session(session_id)
        cfg = session.config
        with session.lock:
            if session.status == "completed":
                raise HTTPException(409, "session is completed")
            if session.phase != "awaiting_observation":
                raise HTTPException(409, "an announcement is pending; submit it first")
            if not (cfg.t_min <= request.estimate <= cfg.t_max):
                raise HTTPException(
                    400, f"estimate must be within [{cfg.t_min}, {cfg.t_max}]")
            if request.completed and request.estimate > session.clock:
                raise HTTPException(
                    400, "a completed project must have finished at or before the current week")
            try:
                if session.clock == 0:
                    belief = bf.correct(cfg, session.belief, request.estimate, request.completed)
                else:
                    belief = bf.update(cfg, session.belief, session.announcements[-1],
                                       request.estimate, request.completed)
            except bf.ZeroLikelihood:
                logger.warning("session %s: zero-likelihood update, using prediction only",
                               session.id)
                belief = (session.belief if session.clock == 0
                          else bf.predict(cfg, session.belief, session.announcements[-1]))
            session.belief = belief
            session.observations.append(request.estimate)
            session.completed_flags.append(request.completed)
            session.pending_completed = request.completed
            recommendation = evaluate(session.policy, belief.observable, belief,
                                      session.observations)
            session.last_recommendation = recommendation
            session.phase = "awaiting_announcement"
            return {
                "recommendation": recommendation,
                "belief": belief.to_pairs(),
                "what_if": _what_if(session),
                "session": session.view(),
            }

    @app.post("/sessions/{session_id}/announce")
    def announce(session_id: str, request: AnnounceRequest):
        session = state.get_session(session_id)
        cfg = session.config
        with session.lock:
            if session.status == "completed":
                raise HTTPException(409, "session is completed")
            if session.phase != "awaiting_announcement":
                raise HTTPException(409, "no observation pending; submit this week's estimate first")
            if not (cfg.t_min <= request.announce <= cfg.t_max):
                raise HTTPException(400, f"announcement must be within [{cfg.t_min}, {cfg.t_max}]")
            session.announcements.append(request.announce)
            if session.pending_completed:
                session.status = "completed"
            else:
                session.clock += 1
            session.phase = "awaiting_observation"
            return session.view()

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
