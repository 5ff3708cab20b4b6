"""World state: POIs, agents, the clock and the restriction schedule."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, InvalidInputError
from .memory import AgentMemory
from .motivation import EventRecord, NeedSpec, NeedState, NeedTier, SatisfactionDelta
from .planning import ActionSequence, BehaviorCandidate, TpbWeights

TICKS_PER_DAY = 48
TICK_MINUTES = 30
EPOCH = datetime(2024, 1, 1)  # a Monday
EARTH_RADIUS_KM = 6371.0088
NEARBY_PER_CATEGORY = 3

CITY_MIX = (
    ("home", 0.34), ("workplace", 0.14), ("restaurant", 0.12), ("cafe", 0.08), ("grocery", 0.08),
    ("park", 0.08), ("commerce", 0.06), ("gym", 0.05), ("library", 0.05),
)
FIRST_NAMES = (
    "Alex", "Blair", "Casey", "Devon", "Emery", "Finley", "Gray", "Harper", "Indy", "Jordan",
    "Kai", "Logan", "Morgan", "Noel", "Oakley", "Parker", "Quinn", "Riley", "Sage", "Taylor",
)


def tick_time(tick: int) -> datetime:
    return EPOCH + timedelta(minutes=TICK_MINUTES * tick)


def iso_time(tick: int) -> str:
    return tick_time(tick).isoformat()


def tick_of(timestamp: str) -> int:
    """Inverse of :func:`iso_time`; rejects timestamps off the 30-minute grid."""
    delta = datetime.fromisoformat(timestamp) - EPOCH
    minutes = delta.total_seconds() / 60
    if minutes % TICK_MINUTES:
        raise InvalidInputError(f"timestamp {timestamp} is not on the tick grid")
    return int(minutes // TICK_MINUTES)


def hour_of(tick: int) -> float:
    return (tick % TICKS_PER_DAY) * TICK_MINUTES / 60


def is_weekend(tick: int) -> bool:
    return (tick // TICKS_PER_DAY) % 7 >= 5


@dataclass(frozen=True)
class Poi:
    id: str
    category: str
    x: float
    y: float

    def __post_init__(self):
        if not self.id:
            raise InvalidInputError("POI id must be non-empty")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidInputError(f"POI {self.id} has non-finite coordinates")

    @property
    def location(self) -> tuple[float, float]:
        return (self.x, self.y)

    def to_dict(self) -> dict:
        return {"id": self.id, "category": self.category, "x": self.x, "y": self.y}


def planar_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance between ``(lat, lon)`` pairs in degrees."""
    lat1, lon1, lat2, lon2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def distance_matrix(points: np.ndarray, geographic: bool = False) -> np.ndarray:
    if not geographic:
        diff = points[:, None, :] - points[None, :, :]
        return np.sqrt((diff**2).sum(-1))
    lat, lon = np.radians(points[:, 0]), np.radians(points[:, 1])
    dlat = lat[:, None] - lat[None, :]
    dlon = lon[:, None] - lon[None, :]
    h = np.sin(dlat / 2) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


@dataclass(frozen=True)
class AgentProfile:
    id: str
    name: str
    home_poi: str
    age: int = 35
    health_status: str = "good"
    income_group: str = "other"
    work_poi: str | None = None
    tpb_weights: TpbWeights = TpbWeights()
    social_ties: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.income_group not in ("high", "low", "other"):
            raise InvalidInputError(f"unknown income group {self.income_group!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "age": self.age,
            "health_status": self.health_status,
            "income_group": self.income_group,
            "home_poi": self.home_poi,
            "work_poi": self.work_poi,
            "tpb_weights": self.tpb_weights.to_dict(),
            "social_ties": sorted(self.social_ties),
        }


@dataclass(frozen=True)
class Ablation:
    disable_motivation: bool = False
    disable_planning: bool = False
    disable_learning: bool = False
    random_need_probability: float = 0.25

    @property
    def label(self) -> str:
        off = "".join(a for a, f in (("M", self.disable_motivation), ("P", self.disable_planning), ("L", self.disable_learning)) if f)
        return "full" if not off else "wo" + off


@dataclass
class Plan:
    """The action an agent is currently carrying out."""

    action_id: str
    candidate: BehaviorCandidate
    sequence: ActionSequence
    need: str | None
    started: int
    step: int = 0
    dwell_left: int = 0
    transit_left: int = 0
    origin: str | None = None
    travelled_km: float = 0.0
    success: bool = True
    outcome: str = ""
    dest: str | None = None
    arrived: str | None = None
    closed: bool = False


@dataclass
class AgentState:
    profile: AgentProfile
    needs: NeedState
    memory: AgentMemory
    location: str | None
    plan: Plan | None = None
    pending_satisfaction: SatisfactionDelta = field(default_factory=SatisfactionDelta)
    pending_active: list[EventRecord] = field(default_factory=list)
    emotion: str = "neutral"
    position: tuple[float, float] | None = None


@dataclass
class WorldRules:
    speed_kmh: float = 20.0
    closure_failure: float = 0.3
    remote_failure: Mapping[str, float] = field(default_factory=lambda: {"high": 0.05, "low": 0.7, "other": 0.2})
    isolation_every: int = 4
    abstraction: bool = True


@dataclass
class WorldState:
    pois: dict[str, Poi]
    agents: dict[str, AgentState]
    seed: int = 0
    clock: int = 0
    ablation: Ablation = Ablation()
    restriction_level: float = 0.0
    schedule: tuple[tuple[int, float], ...] = ()
    passive_event_queue: dict[str, list[EventRecord]] = field(default_factory=dict)
    scripted_events: tuple[tuple[int, str, str | None, tuple[str, ...] | None], ...] = ()
    need_specs: Mapping[str, NeedSpec] = field(default_factory=dict)
    satisfaction_table: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    rules: WorldRules = field(default_factory=WorldRules)
    geographic: bool = False
    transcript: str = "summary"
    initialized: bool = False
    restricted_since: int | None = None

    def __post_init__(self):
        for pid, poi in self.pois.items():
            if pid != poi.id:
                raise InvalidInputError(f"POI key {pid!r} does not match id {poi.id!r}")
        for aid, agent in self.agents.items():
            prof = agent.profile
            for ref in (prof.home_poi, prof.work_poi):
                if ref is not None and ref not in self.pois:
                    raise InvalidInputError(f"agent {aid} references unknown POI {ref!r}")
        self._index()

    def _index(self) -> None:
        self._ids = sorted(self.pois)
        self._row = {pid: i for i, pid in enumerate(self._ids)}
        pts = np.array([self.pois[p].location for p in self._ids], dtype=float).reshape(-1, 2)
        self._dist = distance_matrix(pts, self.geographic) if len(pts) else np.zeros((0, 0))
        cats: dict[str, list[int]] = {}
        for i, pid in enumerate(self._ids):
            cats.setdefault(self.pois[pid].category, []).append(i)
        self._cat_rows = {c: np.array(rows) for c, rows in sorted(cats.items())}
        self._nearby_cache: dict[str, dict] = {}

    def __getstate__(self):
        state = dict(self.__dict__)
        for k in ("_dist", "_nearby_cache", "_row", "_ids", "_cat_rows"):
            state.pop(k, None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._index()

    @property
    def agent_ids(self) -> list[str]:
        return sorted(self.agents)

    @property
    def day(self) -> int:
        return self.clock // TICKS_PER_DAY

    def distance(self, a: str, b: str) -> float:
        return float(self._dist[self._row[a], self._row[b]])

    def transit_ticks(self, a: str, b: str) -> int:
        if a == b:
            return 0
        per_tick = self.rules.speed_kmh * TICK_MINUTES / 60
        return max(1, math.ceil(self.distance(a, b) / per_tick - 1e-9))

    def nearby(self, poi_id: str) -> dict[str, list[dict]]:
        """Closest POIs per category from ``poi_id`` (excluding homes), nearest first."""
        hit = self._nearby_cache.get(poi_id)
        if hit is not None:
            return hit
        row = self._dist[self._row[poi_id]]
        out = {}
        for cat, rows in self._cat_rows.items():
            if cat == "home":
                continue
            d = row[rows]
            order = np.lexsort((rows, d))[:NEARBY_PER_CATEGORY]
            out[cat] = [{"poi_id": self._ids[rows[i]], "distance_km": round(float(d[i]), 3), "category": cat} for i in order]
        self._nearby_cache[poi_id] = out
        return out

    def nearest_physical_km(self, poi_id: str) -> float:
        near = [e["distance_km"] for entries in self.nearby(poi_id).values() for e in entries[:1]]
        return min(near) if near else 0.0


def apply_restriction_schedule(world: WorldState, schedule: Sequence[tuple[int, float]] | None = None) -> WorldState:
    """Set the restriction level for the current day and notify agents of changes.

    ``schedule`` holds ``(start_day, level)`` stages; omitted, the world's own
    schedule is used. A change enqueues one passive event per agent.
    """
    if schedule is not None:
        stages = tuple(sorted((int(d), float(lv)) for d, lv in schedule))
        for _, lv in stages:
            if not 0.0 <= lv <= 1.0:
                raise InvalidInputError(f"restriction level {lv} outside [0, 1]")
        world.schedule = stages
    level = 0.0
    for start, lv in world.schedule:
        if world.day >= start:
            level = lv
    if level > 0 and world.restriction_level == 0:
        world.restricted_since = world.day
    elif level == 0:
        world.restricted_since = None
    if level != world.restriction_level:
        direction = "tightened" if level > world.restriction_level else "eased"
        world.restriction_level = level
        for aid in world.agent_ids:
            world.passive_event_queue.setdefault(aid, []).append(EventRecord(
                "passive",
                f"Movement restrictions {direction} to level {level:.1f}",
                world.clock,
                "environment",
                frozenset({"topic:restriction"}),
            ))
    return world


# ------------------------------------------------------------------ builders

def synthetic_city(n_pois: int, size_km: float, seed: int) -> list[Poi]:
    """Deterministic planar city; every category in the mix appears at least once."""
    rng = random.Random(seed)
    cats = [c for c, _ in CITY_MIX]
    weights = [w for _, w in CITY_MIX]
    chosen = list(cats[: min(n_pois, len(cats))])
    chosen += rng.choices(cats, weights, k=max(0, n_pois - len(chosen)))
    pois = []
    for i, cat in enumerate(chosen):
        # venues cluster towards the centre; homes spread out
        spread = size_km / (2.0 if cat == "home" else 3.0)
        x = min(size_km, max(0.0, rng.gauss(size_km / 2, spread)))
        y = min(size_km, max(0.0, rng.gauss(size_km / 2, spread)))
        pois.append(Poi(f"poi{i:04d}", cat, round(x, 4), round(y, 4)))
    return pois


def generate_profiles(
    pois: Sequence[Poi],
    count: int,
    seed: int,
    income_mix: Mapping[str, float],
    ties_per_agent: int = 3,
    employed_fraction: float = 1.0,
    weights: TpbWeights = TpbWeights(),
) -> list[AgentProfile]:
    rng = random.Random(seed)
    homes = [p.id for p in pois if p.category == "home"] or [p.id for p in pois]
    works = [p.id for p in pois if p.category == "workplace"]
    groups = sorted(income_mix)
    total = sum(income_mix[g] for g in groups)
    # exact group sizes, largest remainder
    quotas = {g: count * income_mix[g] / total for g in groups}
    sizes = {g: int(q) for g, q in quotas.items()}
    for g in sorted(groups, key=lambda g: (-(quotas[g] - sizes[g]), g))[: count - sum(sizes.values())]:
        sizes[g] += 1
    labels = [g for g in groups for _ in range(sizes[g])]
    rng.shuffle(labels)
    ids = [f"a{i:04d}" for i in range(count)]
    profiles = []
    for i, aid in enumerate(ids):
        others = [o for o in ids if o != aid]
        ties = frozenset(rng.sample(others, min(ties_per_agent, len(others))))
        employed = works and rng.random() < employed_fraction
        profiles.append(AgentProfile(
            id=aid,
            name=f"{FIRST_NAMES[i % len(FIRST_NAMES)]} {i:04d}",
            home_poi=rng.choice(homes),
            age=rng.randint(20, 70),
            health_status=rng.choice(("good", "good", "good", "fair", "poor")),
            income_group=labels[i],
            work_poi=rng.choice(works) if employed else None,
            tpb_weights=weights,
            social_ties=ties,
        ))
    # ties are mutual
    mutual: dict[str, set[str]] = {p.id: set(p.social_ties) for p in profiles}
    for p in profiles:
        for t in p.social_ties:
            mutual[t].add(p.id)
    return [AgentProfile(**{**p.__dict__, "social_ties": frozenset(mutual[p.id])}) for p in profiles]


def need_specs_from(config_needs: Mapping[str, Any]) -> dict[str, NeedSpec]:
    return {
        k: NeedSpec(NeedTier.parse(v.tier), v.cap, v.growth, v.threshold, v.initial)
        for k, v in sorted(config_needs.items())
    }


def profile_from_config(p: Any, default_weights: TpbWeights) -> AgentProfile:
    w = p.tpb_weights
    return AgentProfile(
        id=p.id,
        name=p.name,
        home_poi=p.home_poi,
        age=p.age,
        health_status=p.health_status,
        income_group=p.income_group,
        work_poi=p.work_poi,
        tpb_weights=TpbWeights(w.attitude, w.norm, w.control) if w else default_weights,
        social_ties=frozenset(p.social_ties),
    )


def build_world(
    pois: Iterable[Poi],
    profiles: Iterable[AgentProfile],
    *,
    seed: int = 0,
    need_specs: Mapping[str, NeedSpec] | None = None,
    ablation: Ablation = Ablation(),
    schedule: Sequence[tuple[int, float]] = (),
    satisfaction_table: Mapping[str, Mapping[str, float]] | None = None,
    rules: WorldRules | None = None,
    geographic: bool = False,
    initial_needs: Mapping[str, Mapping[str, float]] | None = None,
) -> WorldState:
    """Assemble a world; needs start from their NeedSpec defaults unless ``initial_needs`` overrides them."""
    from .motivation import DEFAULT_NEEDS
    from .planning import DEFAULT_SATISFACTION

    poi_map: dict[str, Poi] = {}
    for p in pois:
        if p.id in poi_map:
            raise InvalidInputError(f"duplicate POI id {p.id!r}")
        poi_map[p.id] = p
    specs = dict(need_specs or DEFAULT_NEEDS)
    agents: dict[str, AgentState] = {}
    for prof in profiles:
        if prof.id in agents:
            raise InvalidInputError(f"duplicate agent id {prof.id!r}")
        values = dict((initial_needs or {}).get(prof.id, {}))
        state = NeedState.from_specs(specs, values)
        agents[prof.id] = AgentState(prof, state, AgentMemory(prof.id), prof.home_poi)
    known = set(agents)
    for prof in (a.profile for a in agents.values()):
        unknown = prof.social_ties - known
        if unknown:
            raise InvalidInputError(f"agent {prof.id} has ties to unknown agents {sorted(unknown)}")
    world = WorldState(
        pois=poi_map,
        agents=agents,
        seed=seed,
        ablation=ablation,
        schedule=tuple(sorted(schedule)),
        need_specs=specs,
        satisfaction_table=dict(satisfaction_table or DEFAULT_SATISFACTION),
        rules=rules or WorldRules(),
        geographic=geographic,
    )
    for a in agents.values():
        a.position = poi_map[a.location].location
    return world


def load_world(config: Any, datasets: Mapping[str, Any] | None = None) -> WorldState:
    """World described by a validated :class:`~socialsim.config.RunConfig`.

    ``datasets`` may map ``"poi_table"`` to already-loaded POIs; otherwise a
    dataset path in the config is read.
    """
    wc = config.world
    if wc.pois is not None:
        pois = [Poi(p.id, p.category, p.x, p.y) for p in wc.pois]
    elif wc.synthetic is not None:
        pois = synthetic_city(wc.synthetic.n_pois, wc.synthetic.size_km, config.seed)
    else:
        loaded = (datasets or {}).get("poi_table")
        if loaded is None:
            from .datasets import read_pois

            loaded = read_pois(wc.dataset)
        pois = list(loaded)
    w = config.tpb_weights
    weights = TpbWeights(w.attitude, w.norm, w.control)
    if config.agents.profiles is not None:
        profiles = [profile_from_config(p, weights) for p in config.agents.profiles]
    else:
        g = config.agents.generator
        profiles = generate_profiles(
            pois, g.count, config.seed if g.seed is None else g.seed, g.income_mix,
            g.ties_per_agent, g.employed_fraction, weights,
        )
    r = config.rules
    ab = config.ablation
    scripted = tuple(
        (e.day * TICKS_PER_DAY + int(e.time[:2]) * 2 + int(e.time[3:]) // 30, e.description, e.topic,
         tuple(e.agents) if e.agents else None)
        for e in config.events
    )
    try:
        world = build_world(
            pois,
            profiles,
            seed=config.seed,
            need_specs=need_specs_from(config.needs),
            ablation=Ablation(ab.disable_motivation, ab.disable_planning, ab.disable_learning, ab.random_need_probability),
            schedule=[(s.start_day, s.level) for s in config.restrictions],
            satisfaction_table=config.satisfaction,
            rules=WorldRules(r.speed_kmh, r.closure_failure, dict(r.remote_failure), r.isolation_every, r.abstraction),
            geographic=wc.coordinates == "geographic",
        )
    except InvalidInputError as exc:
        raise ConfigError(f"invalid world: {exc}", [str(exc)]) from None
    world.scripted_events = tuple(sorted(scripted, key=lambda e: (e[0], e[1])))
    world.transcript = config.output.transcript
    return world
