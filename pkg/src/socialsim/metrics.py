"""Mobility and decision statistics over trajectory and decision logs.

All functions are pure and sort their inputs, so the order in which records
arrive never changes a result.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError
from .motivation import DEFAULT_NEEDS, NeedTier
from .world import EARTH_RADIUS_KM, TICKS_PER_DAY, haversine_km, planar_km

DAYS_PER_WEEK = 7
TICKS_PER_WEEK = TICKS_PER_DAY * DAYS_PER_WEEK


@dataclass(frozen=True)
class Point:
    tick: int
    location: tuple[float, float] | None
    poi_id: str | None
    poi_category: str | None
    action_id: str | None = None


@dataclass(frozen=True)
class Trajectory:
    agent_id: str
    points: tuple[Point, ...]
    geographic: bool = False

    def __post_init__(self):
        ticks = [p.tick for p in self.points]
        if any(b <= a for a, b in zip(ticks, ticks[1:])):
            raise InvalidInputError(f"trajectory {self.agent_id}: ticks must be strictly increasing")


def trajectories_from_records(records: Iterable[Mapping[str, Any]], geographic: bool = False) -> dict[str, Trajectory]:
    by_agent: dict[str, list[Point]] = {}
    for r in records:
        loc = r.get("location")
        by_agent.setdefault(r["agent_id"], []).append(Point(
            int(r["tick"]),
            (float(loc[0]), float(loc[1])) if loc is not None else None,
            r.get("poi_id"),
            r.get("poi_category"),
            r.get("action_id"),
        ))
    return {
        aid: Trajectory(aid, tuple(sorted(pts, key=lambda p: p.tick)), geographic)
        for aid, pts in sorted(by_agent.items())
    }


def _as_trajectories(trajectories: Any, geographic: bool = False) -> dict[str, Trajectory]:
    if isinstance(trajectories, Trajectory):
        return {trajectories.agent_id: trajectories}
    if isinstance(trajectories, Mapping):
        return dict(sorted(trajectories.items()))
    items = list(trajectories)
    if items and isinstance(items[0], Trajectory):
        return {t.agent_id: t for t in sorted(items, key=lambda t: t.agent_id)}
    return trajectories_from_records(items, geographic)


def _dist(a: tuple[float, float], b: tuple[float, float], geographic: bool) -> float:
    return haversine_km(a, b) if geographic else planar_km(a, b)


# ------------------------------------------------------------------ spatial

def radius_of_gyration(traj: Trajectory) -> float:
    """Tick-weighted RMS distance of visited locations from their centroid, in km.

    Only ticks spent at a POI count. Geographic coordinates are projected onto a
    local tangent plane first.
    """
    pts = [p.location for p in traj.points if p.poi_id is not None and p.location is not None]
    if not pts:
        raise InvalidInputError(f"trajectory {traj.agent_id} has no located visits")
    xy = np.array(pts, dtype=float)
    if traj.geographic:
        lat0 = math.radians(float(np.mean(xy[:, 0])))
        xy = np.column_stack((
            np.radians(xy[:, 1]) * math.cos(lat0) * EARTH_RADIUS_KM,
            np.radians(xy[:, 0]) * EARTH_RADIUS_KM,
        ))
    centroid = xy.mean(axis=0)
    return float(math.sqrt(float(((xy - centroid) ** 2).sum(axis=1).mean())))


def daily_locations(traj: Trajectory, n_days: int | None = None) -> list[int]:
    """Distinct POIs visited on each day, from day 0 to the last recorded day."""
    if not traj.points:
        return [0] * (n_days or 0)
    last = max(p.tick for p in traj.points) // TICKS_PER_DAY
    days = n_days if n_days is not None else last + 1
    seen: list[set[str]] = [set() for _ in range(days)]
    for p in traj.points:
        d = p.tick // TICKS_PER_DAY
        if p.poi_id is not None and d < days:
            seen[d].add(p.poi_id)
    return [len(s) for s in seen]


# ----------------------------------------------------------------- intentions

def edit_distance(a: Sequence[Any], b: Sequence[Any]) -> int:
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def sequence_similarity(a: Sequence[Any], b: Sequence[Any]) -> float:
    """``1 - edit_distance / max(len)``; two empty sequences are identical."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - edit_distance(a, b) / longest


@dataclass
class IntentionStats:
    per_day_counts: dict[str, list[int]]
    similarities: dict[str, list[float]]
    mean_count: float
    mean_similarity: float

    @property
    def itd_error(self) -> float:
        return 1.0 - self.mean_similarity


def intention_sequences(decisions: Iterable[Mapping[str, Any]], n_days: int | None = None) -> dict[str, list[list[str]]]:
    """Per agent, per day, the activated needs of ticks where a plan was formed."""
    rows = sorted(decisions, key=lambda r: (r["agent_id"], int(r["tick"])))
    out: dict[str, list[list[str]]] = {}
    last_day = 0
    for r in rows:
        last_day = max(last_day, int(r["tick"]) // TICKS_PER_DAY)
    days = n_days if n_days is not None else last_day + 1
    for r in rows:
        seqs = out.setdefault(r["agent_id"], [[] for _ in range(days)])
        d = int(r["tick"]) // TICKS_PER_DAY
        if r.get("planned") and r.get("activated_need") and d < days:
            seqs[d].append(r["activated_need"])
    return out


def intention_stats(decisions: Iterable[Mapping[str, Any]], n_days: int | None = None) -> IntentionStats:
    seqs = intention_sequences(decisions, n_days)
    counts = {a: [len(d) for d in s] for a, s in seqs.items()}
    sims = {a: [sequence_similarity(x, y) for x, y in zip(s, s[1:])] for a, s in seqs.items()}
    all_counts = [c for v in counts.values() for c in v]
    all_sims = [x for v in sims.values() for x in v]
    return IntentionStats(
        counts,
        sims,
        float(np.mean(all_counts)) if all_counts else 0.0,
        float(np.mean(all_sims)) if all_sims else 1.0,
    )


# ----------------------------------------------------------------- divergence

@dataclass(frozen=True)
class Binning:
    edges: tuple[float, ...]
    name: str = "custom"

    def __post_init__(self):
        e = self.edges
        if len(e) < 2 or any(b <= a for a, b in zip(e, e[1:])):
            raise InvalidInputError("bin edges must be strictly increasing with at least two entries")

    @classmethod
    def radius(cls) -> "Binning":
        return cls(tuple(float(x) for x in np.logspace(-1, 2, 21)), "radius")

    @classmethod
    def daily_locations(cls) -> "Binning":
        return cls(tuple(float(x) for x in np.arange(-0.5, 31.0, 1.0)), "dayloc")

    def histogram(self, samples: Sequence[float]) -> np.ndarray:
        """Counts per bin; samples outside the edges fall into the end bins."""
        x = np.asarray(samples, dtype=float)
        lo, hi = self.edges[0], self.edges[-1]
        x = np.clip(x, lo, np.nextafter(hi, lo))
        counts, _ = np.histogram(x, bins=np.asarray(self.edges))
        return counts.astype(float)


def jsd(p: Sequence[float], q: Sequence[float]) -> float:
    """Jensen-Shannon divergence in bits between two (unnormalised) histograms."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.sum() <= 0 or q.sum() <= 0:
        raise InvalidInputError("histograms must share a shape and have positive mass")
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)

    def kl(a):
        nz = a > 0
        return float((a[nz] * np.log2(a[nz] / m[nz])).sum())

    return min(1.0, max(0.0, 0.5 * kl(p) + 0.5 * kl(q)))


def distribution_divergence(generated: Sequence[float], reference: Sequence[float], binning: Binning | str = "radius") -> float:
    if isinstance(binning, str):
        binning = {"radius": Binning.radius, "dayloc": Binning.daily_locations}[binning]()
    if len(generated) == 0 or len(reference) == 0:
        raise InvalidInputError("divergence needs non-empty samples on both sides")
    return jsd(binning.histogram(generated), binning.histogram(reference))


# ---------------------------------------------------------------------- trips

@dataclass(frozen=True)
class Trip:
    agent_id: str
    depart_tick: int
    arrive_tick: int
    origin: str
    destination: str
    distance_km: float
    action_id: str | None
    need: str | None = None


def extract_trips(trajectories: Any, decisions: Iterable[Mapping[str, Any]] | None = None, geographic: bool = False) -> list[Trip]:
    """Maximal in-transit runs between two distinct POIs.

    The motivating need of a trip is the activated need recorded with the plan
    (its ``action_id``) in the decision log.
    """
    needs = {}
    for r in sorted(decisions or (), key=lambda r: (r["agent_id"], int(r["tick"]))):
        # the record that formed the plan wins
        if r.get("action_id") and r.get("planned") and r["action_id"] not in needs:
            needs[r["action_id"]] = r.get("activated_need")
    trips = []
    for aid, traj in _as_trajectories(trajectories, geographic).items():
        last_stay: Point | None = None
        moving: list[Point] = []
        for p in traj.points:
            if p.poi_id is None:
                moving.append(p)
                continue
            if last_stay is not None and p.poi_id != last_stay.poi_id and last_stay.location and p.location:
                action = next((m.action_id for m in moving if m.action_id), p.action_id)
                start = moving[0].tick if moving else p.tick
                trips.append(Trip(
                    aid, start, p.tick, last_stay.poi_id, p.poi_id,
                    _dist(last_stay.location, p.location, traj.geographic), action, needs.get(action),
                ))
            last_stay = p
            moving = []
    return sorted(trips, key=lambda t: (t.agent_id, t.depart_tick))


def _tiers(tier_of: Mapping[str, Any] | None) -> dict[str, NeedTier]:
    if tier_of is None:
        return {k: s.tier for k, s in DEFAULT_NEEDS.items()}
    return {k: NeedTier.parse(v) for k, v in tier_of.items()}


def social_trips(trips: Sequence[Trip], tier_of: Mapping[str, Any] | None = None) -> list[Trip]:
    tiers = _tiers(tier_of)
    return [t for t in trips if t.need is not None and tiers.get(t.need) is NeedTier.SOCIAL]


@dataclass
class SocialTripStats:
    n_trips: int
    n_social: int
    proportion: float  # percent
    median_km: float | None
    reference_proportion: float | None = None
    reference_median_km: float | None = None
    proportion_rel_error: float | None = None  # percent
    median_rel_error: float | None = None  # percent


def _rel_error(gen: float | None, ref: float | None) -> float | None:
    if gen is None or ref is None or ref == 0:
        return None
    return abs(gen - ref) / abs(ref) * 100.0


def social_trip_stats(
    trajectories: Any,
    decisions: Iterable[Mapping[str, Any]],
    reference: Mapping[str, float] | None = None,
    *,
    tier_of: Mapping[str, Any] | None = None,
    geographic: bool = False,
) -> SocialTripStats:
    """Share of trips motivated by a social-tier need and their median length.

    ``reference`` may carry ``proportion`` (percent) and ``median_km``.
    """
    trips = extract_trips(trajectories, decisions, geographic)
    social = social_trips(trips, tier_of)
    prop = 100.0 * len(social) / len(trips) if trips else 0.0
    median = float(np.median([t.distance_km for t in social])) if social else None
    stats = SocialTripStats(len(trips), len(social), prop, median)
    if reference:
        stats.reference_proportion = reference.get("proportion")
        stats.reference_median_km = reference.get("median_km")
        stats.proportion_rel_error = _rel_error(prop, stats.reference_proportion)
        stats.median_rel_error = _rel_error(median, stats.reference_median_km)
    return stats


def cumulative_distance_ratio(trips: Iterable[Trip | float], threshold_km: float) -> float | None:
    """Fraction of trips no longer than ``threshold_km``; ``None`` for no trips."""
    d = [t.distance_km if isinstance(t, Trip) else float(t) for t in trips]
    if not d:
        return None
    return sum(1 for x in d if x <= threshold_km) / len(d)


# ---------------------------------------------------------------------- weekly

def weekly_mobility(trips: Sequence[Trip], n_weeks: int, measure: str = "trips") -> list[float]:
    if measure not in ("trips", "distance"):
        raise InvalidInputError(f"unknown mobility measure {measure!r}")
    out = [0.0] * n_weeks
    for t in trips:
        w = t.depart_tick // TICKS_PER_WEEK
        if w < n_weeks:
            out[w] += 1.0 if measure == "trips" else t.distance_km
    return out


def _n_weeks(trajectories: Mapping[str, Trajectory]) -> int:
    last = max((p.tick for t in trajectories.values() for p in t.points), default=-1)
    return last // TICKS_PER_WEEK + 1 if last >= 0 else 0


def mobility_ratio_trend(
    trajectories: Any, baseline_week: int = 0, measure: str = "trips", *, n_weeks: int | None = None,
    geographic: bool = False,
) -> list[float]:
    """Weekly mobility divided by the baseline week's (weeks are 0-based)."""
    trajs = _as_trajectories(trajectories, geographic)
    n = n_weeks if n_weeks is not None else _n_weeks(trajs)
    if not 0 <= baseline_week < n:
        raise InvalidInputError(f"baseline week {baseline_week} outside the {n}-week run")
    weekly = weekly_mobility(extract_trips(trajs), n, measure)
    base = weekly[baseline_week]
    if base == 0:
        raise InvalidInputError("baseline week has no mobility to normalise by")
    return [w / base for w in weekly]


@dataclass
class GroupBreakdown:
    reduction: dict[str, float]  # percent
    weekly: dict[str, list[float]]
    shares: dict[str, dict[str, float]]
    alignment: dict[str, float] | None = None

    @property
    def gap(self) -> float | None:
        """Spread between the largest and smallest group reduction (percentage points)."""
        if len(self.reduction) < 2:
            return None
        return max(self.reduction.values()) - min(self.reduction.values())


def visit_shares(traj_by_agent: Mapping[str, Trajectory], agents: Iterable[str]) -> dict[str, float]:
    """Per-category share of arrivals at POIs."""
    counts: dict[str, int] = {}
    for aid in sorted(agents):
        traj = traj_by_agent.get(aid)
        if traj is None:
            continue
        prev = None
        for p in traj.points:
            if p.poi_id is not None and p.poi_id != prev and prev is not None and p.poi_category:
                counts[p.poi_category] = counts.get(p.poi_category, 0) + 1
            if p.poi_id is not None:
                prev = p.poi_id
    total = sum(counts.values())
    return {c: counts[c] / total for c in sorted(counts)} if total else {}


def share_alignment(generated: Mapping[str, float], reference: Mapping[str, float]) -> float:
    cats = sorted(set(generated) | set(reference))
    if not cats:
        raise InvalidInputError("no categories to align")
    return 1.0 - jsd([generated.get(c, 0.0) for c in cats], [reference.get(c, 0.0) for c in cats])


def group_breakdown(
    trajectories: Any,
    profiles: Mapping[str, Any],
    grouping: str = "income_group",
    reference_shares: Mapping[str, Mapping[str, float]] | None = None,
    *,
    first_week: int = 0,
    last_week: int | None = None,
    measure: str = "trips",
    n_weeks: int | None = None,
) -> GroupBreakdown:
    """Mobility reduction between two weeks and POI-category alignment per group.

    ``profiles`` maps agent ids to a group label or to a mapping/object with a
    ``grouping`` attribute. Reduction is ``(first - last) / first`` in percent.
    """
    trajs = _as_trajectories(trajectories)
    n = n_weeks if n_weeks is not None else _n_weeks(trajs)
    last = n - 1 if last_week is None else last_week
    groups: dict[str, list[str]] = {}
    for aid, prof in sorted(profiles.items()):
        if isinstance(prof, str):
            label = prof
        elif isinstance(prof, Mapping):
            label = prof[grouping]
        else:
            label = getattr(prof, grouping)
        groups.setdefault(label, []).append(aid)
    trips = extract_trips(trajs)
    reduction, weekly, shares = {}, {}, {}
    alignment = {} if reference_shares is not None else None
    for label, members in sorted(groups.items()):
        mset = set(members)
        w = weekly_mobility([t for t in trips if t.agent_id in mset], n, measure)
        weekly[label] = w
        reduction[label] = (w[first_week] - w[last]) / w[first_week] * 100.0 if w[first_week] else float("nan")
        shares[label] = visit_shares(trajs, members)
        if alignment is not None and label in reference_shares:
            alignment[label] = share_alignment(shares[label], reference_shares[label])
    return GroupBreakdown(reduction, weekly, shares, alignment)


# ---------------------------------------------------------------- coupling

def need_action_correlation(decisions: Iterable[Mapping[str, Any]], need: str = "hunger", category_prefix: str = "eat") -> float:
    """Pearson correlation between a need's value and choosing a matching action that tick.

    Pooled over all agent-ticks. Returns 0.0 when either side is constant.
    """
    x, y = [], []
    for r in sorted(decisions, key=lambda r: (r["agent_id"], int(r["tick"]))):
        x.append(float(r["needs"][need]))
        chosen = r.get("chosen") or ""
        y.append(1.0 if r.get("planned") and chosen.startswith(category_prefix) else 0.0)
    if len(x) < 2:
        return 0.0
    xa, ya = np.asarray(x), np.asarray(y)
    sx, sy = xa.std(), ya.std()
    if sx == 0 or sy == 0:
        return 0.0
    return float(((xa - xa.mean()) * (ya - ya.mean())).mean() / (sx * sy))


# -------------------------------------------------------------------- report

@dataclass
class MetricEntry:
    name: str
    generated: dict
    reference: dict | None = None
    divergence: float | None = None
    n_generated: int = 0
    n_reference: int | None = None


@dataclass
class MetricReport:
    label: str
    entries: list[MetricEntry] = field(default_factory=list)

    def get(self, name: str) -> MetricEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        out = {"label": self.label, "metrics": []}
        for e in self.entries:
            d = {k: v for k, v in asdict(e).items() if v is not None}
            out["metrics"].append(d)
        return out


def _summary(values: Sequence[float]) -> dict:
    if not len(values):
        return {"n": 0}
    a = np.asarray(values, dtype=float)
    return {"n": int(a.size), "mean": float(a.mean()), "median": float(np.median(a)),
            "p10": float(np.percentile(a, 10)), "p90": float(np.percentile(a, 90))}


def evaluate(
    trajectory_records: Sequence[Mapping[str, Any]],
    decision_records: Sequence[Mapping[str, Any]],
    profiles: Mapping[str, Any] | None = None,
    reference: Mapping[str, Any] | None = None,
    *,
    label: str = "run",
    geographic: bool = False,
    tier_of: Mapping[str, Any] | None = None,
    baseline_week: int = 0,
) -> MetricReport:
    """Every metric for one run.

    ``reference`` may hold ``trajectories`` (records in the same schema),
    ``social`` (``proportion``/``median_km``) and ``group_shares``.
    Divergences appear only for metrics a reference covers.
    """
    reference = reference or {}
    trajs = trajectories_from_records(trajectory_records, geographic)
    ref_trajs = trajectories_from_records(reference["trajectories"], geographic) if reference.get("trajectories") else None
    report = MetricReport(label)

    radius = [radius_of_gyration(t) for t in trajs.values() if any(p.poi_id for p in t.points)]
    entry = MetricEntry("radius_of_gyration", _summary(radius), n_generated=len(radius))
    if ref_trajs:
        rr = [radius_of_gyration(t) for t in ref_trajs.values() if any(p.poi_id for p in t.points)]
        entry.reference, entry.n_reference = _summary(rr), len(rr)
        entry.divergence = distribution_divergence(radius, rr, "radius") if radius and rr else None
    report.entries.append(entry)

    dayloc = [c for t in trajs.values() for c in daily_locations(t)]
    entry = MetricEntry("daily_locations", _summary(dayloc), n_generated=len(dayloc))
    if ref_trajs:
        rd = [c for t in ref_trajs.values() for c in daily_locations(t)]
        entry.reference, entry.n_reference = _summary(rd), len(rd)
        entry.divergence = distribution_divergence(dayloc, rd, "dayloc") if dayloc and rd else None
    report.entries.append(entry)

    it = intention_stats(decision_records)
    report.entries.append(MetricEntry(
        "intentions",
        {"mean_per_day": it.mean_count, "mean_similarity": it.mean_similarity, "itd_error": it.itd_error},
        n_generated=sum(len(v) for v in it.per_day_counts.values()),
    ))

    st = social_trip_stats(trajs, decision_records, reference.get("social"), tier_of=tier_of)
    gen = {"n_trips": st.n_trips, "n_social": st.n_social, "proportion": st.proportion, "median_km": st.median_km}
    trips = social_trips(extract_trips(trajs, decision_records), tier_of)
    gen["within_5km"] = cumulative_distance_ratio(trips, 5.0)
    entry = MetricEntry("social_trips", gen, n_generated=st.n_trips)
    if reference.get("social"):
        entry.reference = dict(reference["social"])
        entry.generated["proportion_rel_error"] = st.proportion_rel_error
        entry.generated["median_rel_error"] = st.median_rel_error
    report.entries.append(entry)

    n_weeks = _n_weeks(trajs)
    if n_weeks > baseline_week:
        weekly = weekly_mobility(extract_trips(trajs), n_weeks)
        ratios = [w / weekly[baseline_week] for w in weekly] if weekly[baseline_week] else None
        report.entries.append(MetricEntry("mobility_ratio", {"weekly_trips": weekly, "ratios": ratios}, n_generated=n_weeks))

    if profiles:
        gb = group_breakdown(trajs, profiles, reference_shares=reference.get("group_shares"))
        report.entries.append(MetricEntry(
            "group_breakdown",
            {"reduction": gb.reduction, "gap": gb.gap, "shares": gb.shares, **({"alignment": gb.alignment} if gb.alignment else {})},
            n_generated=len(profiles),
        ))

    corr = need_action_correlation(decision_records)
    report.entries.append(MetricEntry("need_action_correlation", {"hunger_eat_r": corr}, n_generated=len(decision_records)))
    return report
