"""The synchronized tick loop.

Each tick every agent perceives, updates its needs, picks at most one need,
plans if idle, advances its current action and learns from what happened.
Agents only write their own state; anything aimed at another agent (a visit,
a call) is collected and delivered at the tick barrier in agent-id order, so
sequential and concurrent execution produce identical bytes.
"""

from __future__ import annotations

import logging
import math
import pickle
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .cognition import (
    CognitionBackend,
    CognitionSession,
    appraise_events,
    generate_thoughts,
    init_basic_needs,
    init_high_level_needs,
    update_emotion,
)
from .cognition.oracle import derive_seed
from .errors import CognitionError, ContractViolation, SocialSimError
from .memory import MemoryQuery, importance_for
from .motivation import (
    EventRecord,
    NeedTier,
    SatisfactionDelta,
    activated_need,
    apply_event_appraisals,
    step_physiological,
    thresholds_of,
)
from .planning import (
    PHYSICAL,
    ActionSequence,
    ActionStep,
    BehaviorCandidate,
    Intention,
    generate_candidates,
    ground_action,
    intention_score,
    restrict_control,
    score_candidate,
    select_action,
)
from .records import JsonlWriter, read_header, truncate, write_jsonl
from .world import (
    TICKS_PER_DAY,
    AgentState,
    Plan,
    WorldState,
    apply_restriction_schedule,
    hour_of,
    is_weekend,
    iso_time,
)

log = logging.getLogger("socialsim.engine")

OUTPUT_FILES = {
    "trajectory": "trajectories.jsonl",
    "decision": "decisions.jsonl",
    "memory": "memory.jsonl",
    "transcript": "transcript.jsonl",
}
CHECKPOINT_DIR = "checkpoints"
WEATHER = (("sunny", 0.5), ("cloudy", 0.3), ("rainy", 0.2))
UNSATISFIABLE_AT_VENUE = ("home", "workplace")

# tick-of-day offsets of recurring environment events
WORKDAY_TICK = 16  # 08:00
NEWS_TICK = 14  # 07:00
FREE_TIME_WEEKDAY = 37  # 18:30
FREE_TIME_WEEKEND = 20  # 10:00


def weather_of(seed: int, day: int) -> str:
    u = random.Random(derive_seed(seed, ("weather", day))).random()
    acc = 0.0
    for name, p in WEATHER:
        acc += p
        if u < acc:
            return name
    return WEATHER[-1][0]


@dataclass
class AgentTick:
    trajectory: dict
    decision: dict
    outbound: list[tuple[str, EventRecord]] = field(default_factory=list)
    transcript: list[dict] = field(default_factory=list)


@dataclass
class RunResult:
    trajectories: list[dict]
    decisions: list[dict]
    memory: list[dict]
    output_dir: Path | None = None

    @property
    def paths(self) -> dict[str, Path]:
        if self.output_dir is None:
            return {}
        return {k: self.output_dir / v for k, v in OUTPUT_FILES.items()}


# ------------------------------------------------------------------ context

def _situation(world: WorldState, agent: AgentState) -> dict:
    prof = agent.profile
    t = world.clock
    loc = agent.location
    ties = [
        {"agent_id": o, "name": world.agents[o].profile.name, "home_poi": world.agents[o].profile.home_poi}
        for o in sorted(prof.social_ties)
    ]
    ctx = {
        "agent_id": prof.id,
        "profile": prof.to_dict(),
        "time": iso_time(t),
        "hour": hour_of(t),
        "weekend": is_weekend(t),
        "weather": weather_of(world.seed, t // TICKS_PER_DAY),
        "location": loc,
        "location_category": world.pois[loc].category if loc else None,
        "nearby": world.nearby(loc) if loc else {},
        "nearest_physical_km": world.nearest_physical_km(loc) if loc else 0.0,
        "ties": ties,
        "restriction_level": world.restriction_level,
        "needs": agent.needs.snapshot(),
        "emotion": agent.emotion,
    }
    return ctx


def _environment_events(world: WorldState, agent: AgentState) -> list[EventRecord]:
    t = world.clock
    tod = t % TICKS_PER_DAY
    aid = agent.profile.id
    out = []

    def ev(desc: str, topic: str | None, *extra: str) -> EventRecord:
        return EventRecord("passive", desc, t, "environment", frozenset({f"topic:{topic}", *extra} if topic else extra))

    if world.restriction_level > 0 and tod == NEWS_TICK:
        # coverage escalates week by week while restrictions last
        weeks = (world.day - (world.restricted_since or world.day)) // 7
        out.append(ev("News reports on the outbreak and the movement restrictions", "pandemic_news", f"severity:{1 + weeks}"))
    if agent.profile.work_poi and not is_weekend(t) and tod == WORKDAY_TICK:
        out.append(ev("A new workday begins and tasks are waiting", "workday"))
    if tod == (FREE_TIME_WEEKEND if is_weekend(t) else FREE_TIME_WEEKDAY):
        out.append(ev("Some free time opens up", "free_time"))
    every = world.rules.isolation_every
    offset = derive_seed(world.seed, ("isolation", aid)) % every
    social_now = agent.plan is not None and agent.plan.candidate.category.startswith("social")
    if 14 <= tod < 46 and (t + offset) % every == 0 and not social_now:
        out.append(ev("Spent a few hours without social contact", "isolation"))
    for when, desc, topic, who in world.scripted_events:
        if when == t and (who is None or aid in who):
            out.append(ev(desc, topic))
    return out


# ---------------------------------------------------------------- execution

def _start_step(world: WorldState, agent: AgentState, plan: Plan) -> None:
    step = plan.sequence.steps[plan.step]
    plan.dwell_left = step.duration
    if step.target and step.target != agent.location:
        plan.origin = agent.location
        plan.dest = step.target
        plan.transit_left = world.transit_ticks(agent.location, step.target)
        plan.travelled_km += world.distance(agent.location, step.target)


def _arrive(world: WorldState, agent: AgentState, plan: Plan, rng: random.Random) -> None:
    poi = world.pois[agent.location]
    cand = plan.candidate
    if (
        cand.modality == PHYSICAL
        and agent.location == cand.target_poi
        and poi.category not in UNSATISFIABLE_AT_VENUE
        and world.restriction_level > 0
        and rng.random() < world.restriction_level * world.rules.closure_failure
    ):
        plan.success = False
        plan.closed = True
        plan.outcome = f"The {poi.category} was closed due to restrictions"
        plan.step = len(plan.sequence.steps) - 1
        plan.dwell_left = 1


def _advance(world: WorldState, agent: AgentState, rng: random.Random) -> tuple[bool, bool]:
    """Move the plan one tick. Returns ``(in_transit, completed)``.

    While travelling the agent has no POI. On the last transit tick it is
    recorded in transit at the destination's coordinates and only counts as
    arrived from the next tick on.
    """
    plan = agent.plan
    if plan is None:
        return False, False
    if plan.arrived:
        plan.arrived = None
        _arrive(world, agent, plan, rng)
    elif plan.transit_left == 0 and plan.dwell_left == 0:
        _start_step(world, agent, plan)
    if plan.transit_left > 0:
        total = world.transit_ticks(plan.origin, plan.dest)
        plan.transit_left -= 1
        frac = (total - plan.transit_left) / total
        a, b = world.pois[plan.origin].location, world.pois[plan.dest].location
        agent.position = (a[0] + (b[0] - a[0]) * frac, a[1] + (b[1] - a[1]) * frac)
        agent.location = None
        if plan.transit_left == 0:
            plan.arrived = plan.dest
        return True, False
    plan.dwell_left -= 1
    if plan.dwell_left == 0:
        plan.step += 1
        if plan.step >= len(plan.sequence.steps):
            return False, True
    return False, False


def _finish_location(agent: AgentState) -> None:
    plan = agent.plan
    if plan is not None and plan.arrived:
        agent.location = plan.arrived


def _outcome(world: WorldState, agent: AgentState, plan: Plan, rng: random.Random) -> None:
    cand = plan.candidate
    if not plan.success:
        return
    if cand.category == "work_remote":
        p = world.rules.remote_failure.get(agent.profile.income_group, 0.0)
        if rng.random() < p:
            plan.success = False
            plan.outcome = "Remote work did not pay off and I lost pay for the day"
            return
    plan.outcome = plan.outcome or "it went as planned"


# ------------------------------------------------------------------ planning

REST_SEQUENCE = ActionSequence((ActionStep("rest", None, 1),))


def _need_description(need: str) -> str:
    return need.replace("_", " ")


def _plan(world: WorldState, agent: AgentState, need: str, ctx: dict, session: CognitionSession, decision: dict) -> Plan:
    t = world.clock
    mem = agent.memory
    ab = world.ablation
    queries = mem.formulate_queries({**ctx, "activated_need": need}, session)
    # past outcomes for this need, whatever the question wording
    focused = MemoryQuery(queries[0].question, frozenset({f"domain:{need}"}), 6)
    retrieved = mem.retrieve_many([*queries, focused], t, limit=12)
    texts, hits = retrieved.texts(), retrieved.hits()
    decision["memory_queries"] = [q.question for q in queries]
    decision["retrieved"] = [n.id for n in retrieved.nodes]
    cands = generate_candidates(need, ctx, session, need_description=_need_description(need))
    loc = agent.location
    listed = []
    if ab.disable_planning:
        chosen = Intention(cands[0], float("nan"), 0)
        for c in cands:
            listed.append({**c.to_dict(), "scores": None, "intention": None})
    else:
        scored = []
        for c in cands:
            dist = world.distance(loc, c.target_poi) if c.target_poi and c.target_poi in world.pois and loc else 0.0
            s = score_candidate(
                c, {**ctx, "distance_km": round(dist, 3)}, session,
                memory_results=texts, memory_hits=hits, memory_query=queries[0].question if queries else None,
            )
            s = restrict_control(s, c, world.restriction_level)
            scored.append((c, s))
            listed.append({**c.to_dict(), "scores": s.to_dict(), "intention": intention_score(s, agent.profile.tpb_weights)})
        chosen = select_action(scored, agent.profile.tpb_weights)
    decision["candidates"] = listed
    seq = ground_action(
        chosen, ctx, session, known_pois=world.pois,
        satisfaction_table=world.satisfaction_table, physiological=agent.needs.physiological,
    )
    action_id = f"{agent.profile.id}:{t}:{chosen.candidate.id}"
    decision["chosen"] = chosen.candidate.id
    decision["chosen_index"] = chosen.index
    decision["intention"] = None if math.isnan(chosen.score) else chosen.score
    decision["sequence"] = seq.to_dict()
    return Plan(action_id, chosen.candidate, seq, need, t)


def _routine_home(agent: AgentState, t: int) -> Plan:
    home = agent.profile.home_poi
    cand = BehaviorCandidate("return_home", "Return home", home, PHYSICAL, "return_home")
    return Plan(f"{agent.profile.id}:{t}:return_home", cand, ActionSequence((ActionStep("Return home", home, 1),)), None, t)


# ------------------------------------------------------------------ learning

def _recall(agent: AgentState, question: str, t: int, tags=None, limit: int = 3) -> list[str]:
    if not len(agent.memory):
        return []
    return agent.memory.retrieve(MemoryQuery(question, tags, limit), t).texts()


def _learn_from_completion(world, agent: AgentState, plan: Plan, event: EventRecord, ctx, session, before: float) -> list[str]:
    t = world.clock
    mem = agent.memory
    recalled = _recall(agent, event.description, t)
    thoughts = generate_thoughts(agent.profile, event, recalled, session, context=ctx)
    emo = update_emotion(agent.emotion, [event.description], recalled, session, context=ctx)
    agent.emotion = emo["updated_emotion"]
    ids = [mem.append_stream(event, thoughts["thoughts"], agent.emotion, plan.outcome, importance=importance_for(before))]
    context = ("context:restricted",) if world.restriction_level > 0 else ()
    ids.append(mem.record_action_outcome(
        plan.need or "routine", plan.candidate, plan.outcome, plan.success, timestamp=t,
        importance=importance_for(before), tags=context,
    ))
    ids.append(mem.update_state("emotion", agent.emotion, emo["reasoning"], timestamp=t))
    ids.append(mem.update_state(f"attitude:{plan.candidate.category}", thoughts["attitude"], thoughts["reflection"], timestamp=t))
    return ids


def _daily_abstraction(world: WorldState, agent: AgentState, session) -> list[str]:
    t = world.clock
    day_start = t - (t % TICKS_PER_DAY)
    groups: dict[str, list[str]] = {}
    for node in agent.memory.nodes_between(day_start, t + 1):
        if node.store != "action_space" or node.abstraction_level:
            continue
        cat = next((tg for tg in sorted(node.tags) if tg.startswith("category:")), None)
        if cat:
            groups.setdefault(cat, []).append(node.id)
    made = []
    for cat in sorted(groups):
        ids = groups[cat]
        if len(ids) < 2:
            continue
        try:
            made.append(agent.memory.abstract(ids[-5:], session, timestamp=t))
        except (CognitionError, ContractViolation) as exc:
            session.warn(f"abstraction skipped for {cat}: {exc}")
    return made


# ---------------------------------------------------------------- agent tick

def _tick_agent(world: WorldState, aid: str, inbox: list[EventRecord], backend: CognitionBackend) -> AgentTick:
    t = world.clock
    agent = world.agents[aid]
    prof = agent.profile
    ab = world.ablation
    session = CognitionSession(backend, aid, t, world.transcript)
    rng = random.Random(derive_seed(world.seed, ("world", aid, t)))
    passive = list(inbox) + _environment_events(world, agent)
    active, agent.pending_active = agent.pending_active, []
    ctx = _situation(world, agent)
    writes: list[str] = []

    # motivation
    if not ab.disable_motivation:
        agent.needs = step_physiological(agent.needs, agent.pending_satisfaction)
        if active or passive:
            topics = frozenset(tg for e in (*active, *passive) for tg in e.tags if tg.startswith("topic:"))
            question = "; ".join(e.description for e in (*active, *passive))
            recalled = _recall(agent, question, t, topics or None, limit=5)
            appraisals = appraise_events(agent.needs, active, passive, recalled, session, context=ctx)
            agent.needs = apply_event_appraisals(agent.needs, (), appraisals)
        ctx["needs"] = agent.needs.snapshot()
    agent.pending_satisfaction = SatisfactionDelta()
    if not ab.disable_learning:
        for e in passive:
            writes.append(agent.memory.append_stream(e))

    # activation
    need = None if ab.disable_motivation else activated_need(agent.needs, thresholds_of(world.need_specs))
    decision = {
        "agent_id": aid,
        "tick": t,
        "time": iso_time(t),
        "needs": agent.needs.snapshot(),
        "activated_need": need,
        "events": [e.description for e in (*active, *passive)],
        "planned": False,
        "action_id": None,
        "memory_queries": None,
        "retrieved": None,
        "candidates": None,
        "chosen": None,
        "chosen_index": None,
        "intention": None,
        "sequence": None,
        "routine": None,
        "outcome": None,
        "success": None,
        "memory_writes": None,
        "warnings": [],
    }

    # planning
    if agent.plan is None and agent.location is not None:
        drive = need
        if ab.disable_motivation:
            drive = None
            if rng.random() < ab.random_need_probability:
                drive = rng.choice(sorted(agent.needs.values))
            decision["activated_need"] = drive
        if drive is not None:
            try:
                agent.plan = _plan(world, agent, drive, ctx, session, decision)
            except (CognitionError, SocialSimError) as exc:
                session.warn(f"planning failed ({exc}); resting in place")
                rest = BehaviorCandidate("rest_in_place", "Rest in place")
                agent.plan = Plan(f"{aid}:{t}:rest_in_place", rest, REST_SEQUENCE, drive, t)
                decision["chosen"] = rest.id
            decision["planned"] = True
            decision["action_id"] = agent.plan.action_id
        elif agent.location != prof.home_poi:
            agent.plan = _routine_home(agent, t)
            decision["routine"] = "return_home"
            decision["action_id"] = agent.plan.action_id

    # execution
    plan = agent.plan
    before_needs = agent.needs
    in_transit, completed = _advance(world, agent, rng)
    position = agent.position
    location = None if in_transit else agent.location
    _finish_location(agent)
    outbound: list[tuple[str, EventRecord]] = []
    if completed:
        _outcome(world, agent, plan, rng)
        agent.plan = None
        cand = plan.candidate
        if plan.success:
            agent.pending_satisfaction = plan.sequence.satisfies
        tags = {f"category:{cand.category}", "success" if plan.success else "failure"}
        if plan.need:
            tags.add(f"need:{plan.need}")
        if plan.closed:
            tags.add("topic:venue_closed")
        event = EventRecord("active", f"{cand.description}: {plan.outcome}", t, aid, frozenset(tags))
        agent.pending_active.append(event)
        decision["outcome"] = plan.outcome
        decision["success"] = plan.success
        if plan.success and cand.category in ("social_visit", "social_call") and ":" in cand.id:
            other = cand.id.split(":", 1)[1]
            if other in world.agents:
                verb = "visited you" if cand.category == "social_visit" else "called you"
                topic = "visited_by_friend" if cand.category == "social_visit" else "call_received"
                outbound.append((other, EventRecord(
                    "passive", f"{prof.name} {verb}", t, aid, frozenset({f"topic:{topic}"}))))
        if not ab.disable_learning and cand.category != "return_home":
            change = max((abs(before_needs.values[n] - agent.needs.values[n]) for n in agent.needs.values), default=0.0)
            change = max(change, max(plan.sequence.satisfies.deltas.values(), default=0.0) if plan.success else 0.0)
            writes += _learn_from_completion(world, agent, plan, event, ctx, session, change)
    if not ab.disable_learning and world.rules.abstraction and t % TICKS_PER_DAY == TICKS_PER_DAY - 1:
        writes += _daily_abstraction(world, agent, session)
    decision["memory_writes"] = writes
    decision["warnings"] = list(session.warnings)

    loc_poi = world.pois[location] if location else None
    trajectory = {
        "agent_id": aid,
        "tick": t,
        "time": iso_time(t),
        "poi_id": location,
        "poi_category": loc_poi.category if loc_poi else None,
        "location": [round(position[0], 6), round(position[1], 6)] if position else None,
        "in_transit": in_transit,
        "activated_need": decision["activated_need"],
        "action_id": plan.action_id if plan else None,
        "category": plan.candidate.category if plan else None,
    }
    return AgentTick(trajectory, decision, outbound, session.entries)


# --------------------------------------------------------------- simulation

def initialize(world: WorldState, backend: CognitionBackend) -> list[dict]:
    """Seed every agent's needs from the backend; runs once before the first tick."""
    if world.initialized:
        return []
    entries = []
    for aid in world.agent_ids:
        agent = world.agents[aid]
        session = CognitionSession(backend, aid, -1, world.transcript)
        env = {"current_time": iso_time(world.clock), "weather": weather_of(world.seed, world.day), "hour": hour_of(world.clock)}
        basic = init_basic_needs(agent.profile, env, session)
        high = init_high_level_needs(agent.profile, [], session)
        updates = {k: v for k, v in basic.items() if k in agent.needs.values}
        updates.update({k: v for k, v in high.items() if k in agent.needs.values})
        agent.needs = agent.needs.with_values({k: min(agent.needs.caps[k], max(0.0, v)) for k, v in updates.items()})
        entries.extend(session.entries)
    world.initialized = True
    return entries


def step(world: WorldState, backend: CognitionBackend, *, executor: ThreadPoolExecutor | None = None) -> tuple[WorldState, list[AgentTick]]:
    """Advance the world by exactly one tick."""
    if world.clock % TICKS_PER_DAY == 0:
        apply_restriction_schedule(world)
    ids = world.agent_ids
    inboxes = {aid: world.passive_event_queue.pop(aid, []) for aid in ids}
    if executor is None:
        results = [_tick_agent(world, aid, inboxes[aid], backend) for aid in ids]
    else:
        results = list(executor.map(lambda aid: _tick_agent(world, aid, inboxes[aid], backend), ids))
    for res in results:
        for target, ev in res.outbound:
            world.passive_event_queue.setdefault(target, []).append(ev)
    world.clock += 1
    return world, results


class Simulation:
    """Runs a world against a backend, streaming outputs and checkpointing daily."""

    def __init__(
        self,
        world: WorldState,
        backend: CognitionBackend,
        output_dir: str | Path | None = None,
        *,
        mode: str = "sequential",
        workers: int = 4,
        checkpoint_every_days: int = 1,
        keep_records: bool = True,
        meta: dict | None = None,
    ):
        if mode not in ("sequential", "concurrent"):
            raise ValueError(f"unknown execution mode {mode!r}")
        self.world = world
        self.backend = backend
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.mode = mode
        self.workers = workers
        self.checkpoint_every_days = checkpoint_every_days
        self.keep_records = keep_records
        self.meta = dict(meta or {})
        self.trajectories: list[dict] = []
        self.decisions: list[dict] = []
        self._writers: dict[str, JsonlWriter] = {}

    # outputs
    def _open(self, append: bool) -> None:
        if self.output_dir is None:
            return
        self.output_dir.mkdir(parents=True, exist_ok=True)
        meta = {**self.meta, "coordinates": "geographic" if self.world.geographic else "planar", "ticks_per_day": TICKS_PER_DAY}
        for kind in ("trajectory", "decision", "transcript"):
            self._writers[kind] = JsonlWriter(self.output_dir / OUTPUT_FILES[kind], kind, append=append, **meta)

    def _close(self) -> None:
        for w in self._writers.values():
            w.close()
        self._writers = {}

    def _emit(self, results: Sequence[AgentTick]) -> None:
        for kind, attr in (("trajectory", "trajectory"), ("decision", "decision")):
            records = [getattr(r, attr) for r in results]
            if self.keep_records:
                (self.trajectories if kind == "trajectory" else self.decisions).extend(records)
            if kind in self._writers:
                self._writers[kind].write_all(records)
        if "transcript" in self._writers:
            for r in results:
                self._writers["transcript"].write_all(r.transcript)

    def _checkpoint(self) -> Path | None:
        if self.output_dir is None:
            return None
        for w in self._writers.values():
            w.flush()
        ckdir = self.output_dir / CHECKPOINT_DIR
        ckdir.mkdir(exist_ok=True)
        path = ckdir / f"day_{self.world.day:04d}.pkl"
        tmp = path.with_suffix(".tmp")
        payload = {"world": self.world, "offsets": {k: w.offset for k, w in self._writers.items()}, "meta": self.meta}
        with open(tmp, "wb") as fh:
            pickle.dump(payload, fh, protocol=pickle.HIGHEST_PROTOCOL)
        tmp.replace(path)
        return path

    def _write_memory(self) -> None:
        if self.output_dir is None:
            return
        records = [r for aid in self.world.agent_ids for r in self.world.agents[aid].memory.dump()]
        write_jsonl(self.output_dir / OUTPUT_FILES["memory"], "memory", records, **self.meta)

    def memory_dump(self) -> list[dict]:
        return [r for aid in self.world.agent_ids for r in self.world.agents[aid].memory.dump()]

    def run(self, n_ticks: int, *, resume: bool = False) -> RunResult:
        """Apply ``n_ticks`` more ticks; outputs are flushed even on failure."""
        if n_ticks < 0:
            raise ValueError("n_ticks must be >= 0")
        self._open(append=resume)
        executor = ThreadPoolExecutor(self.workers) if self.mode == "concurrent" else None
        try:
            if not self.world.initialized:
                entries = initialize(self.world, self.backend)
                if "transcript" in self._writers:
                    self._writers["transcript"].write_all(entries)
                self._checkpoint()
            for _ in range(n_ticks):
                _, results = step(self.world, self.backend, executor=executor)
                self._emit(results)
                if self.world.clock % (TICKS_PER_DAY * self.checkpoint_every_days) == 0:
                    self._checkpoint()
            self._write_memory()
        finally:
            if executor is not None:
                executor.shutdown()
            self._close()
        return RunResult(self.trajectories, self.decisions, self.memory_dump(), self.output_dir)

    @classmethod
    def resume(cls, output_dir: str | Path, backend: CognitionBackend, **kwargs) -> "Simulation":
        """Reload the newest checkpoint and cut logs back to its offsets."""
        output_dir = Path(output_dir)
        cks = sorted((output_dir / CHECKPOINT_DIR).glob("day_*.pkl"))
        if not cks:
            raise FileNotFoundError(f"no checkpoint under {output_dir}")
        with open(cks[-1], "rb") as fh:
            payload = pickle.load(fh)
        for kind, off in payload["offsets"].items():
            path = output_dir / OUTPUT_FILES[kind]
            read_header(path)
            truncate(path, off)
        sim = cls(payload["world"], backend, output_dir, meta=payload.get("meta"), **kwargs)
        sim.keep_records = kwargs.get("keep_records", False)
        return sim


def run(
    world: WorldState,
    n_ticks: int,
    backend: CognitionBackend,
    output_dir: str | Path | None = None,
    **kwargs: Any,
) -> RunResult:
    return Simulation(world, backend, output_dir, **kwargs).run(n_ticks)
