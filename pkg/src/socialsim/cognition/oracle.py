"""Seeded rule-table cognition.

Stands in for a language model so every mechanism of the agent loop can run
offline and reproducibly. Randomness for a request is derived from the run
seed and the request key (agent, tick, template, discriminator), so the order
in which concurrent requests arrive cannot change any answer.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from typing import Any, Callable, Mapping

from . import CognitionBackend, CognitionRequest, CognitionResponse
from .prompts import conform

PHYSICAL = "physical"
WAKE_HOUR = 7.0
REMOTE = "remote"

# (attitude, norm, control) before situational adjustments
BASE_SCORES: dict[str, tuple[float, float, float]] = {
    "eat_home": (0.9, 0.8, 0.7),
    "eat_delivery": (0.5, 0.6, 0.9),
    "eat_out": (0.6, 0.7, 0.5),
    "sleep": (0.9, 0.9, 0.9),
    "rest": (0.5, 0.6, 0.9),
    "work_office": (0.7, 0.8, 0.8),
    "work_remote": (0.4, 0.4, 0.65),
    "social_visit": (0.8, 0.6, 0.6),
    "social_venue": (0.7, 0.7, 0.7),
    "social_call": (0.5, 0.55, 0.8),
    "leisure_park": (0.8, 0.6, 0.6),
    "leisure_learn": (0.6, 0.7, 0.6),
    "leisure_home": (0.45, 0.45, 0.75),
    "safety_supplies": (0.6, 0.7, 0.7),
    "safety_stay": (0.6, 0.6, 0.9),
}

# Subjective need deltas of completed actions, keyed by category.
ACTION_EFFECTS: dict[str, dict[str, float]] = {
    "social_visit": {"social": -0.6},
    "social_venue": {"social": -0.55},
    "social_call": {"social": -0.4},
    "work_office": {"esteem": -0.7},
    "work_remote": {"esteem": -0.7},
    "leisure_park": {"self_actualization": -0.5},
    "leisure_learn": {"self_actualization": -0.5},
    "leisure_home": {"self_actualization": -0.4},
    "safety_supplies": {"safety": -0.05},
    "safety_stay": {"safety": -0.02},
}

# Passive event topics and their deltas.
TOPIC_EFFECTS: dict[str, dict[str, float]] = {
    "isolation": {"social": 0.05},
    "workday": {"esteem": 0.7},
    "free_time": {"self_actualization": 0.2},
    "visited_by_friend": {"social": -0.3},
    "call_received": {"social": -0.25},
    "restriction": {"safety": 0.1},
    "pandemic_news": {"safety": 0.003},
    "venue_closed": {"safety": 0.0},
    "social_rejection": {"social": 0.05},
    "exercise": {"fatigue": -0.1, "hunger": 0.1},
}

# Topics whose effect fades as similar experiences accumulate in memory.
HABITUATING = {"pandemic_news": 3, "restriction": 2}

KEYWORD_TOPICS = (
    ("negative social feedback", "social_rejection"),
    ("rejection", "social_rejection"),
    ("rejected", "social_rejection"),
    ("exercise", "exercise"),
    ("physical activity", "exercise"),
    ("without social contact", "isolation"),
)

NEED_QUERIES = {
    "fatigue": "What actions did I take after feeling fatigued?",
    "hunger": "What did I eat when I felt hungry before?",
    "social": "What social activities improved my mood previously?",
    "safety": "How did restrictions affect my plans before?",
    "esteem": "How did working remotely or at the office go before?",
    "self_actualization": "Which leisure activities did I enjoy before?",
}
WEATHER_QUERY = "How did I react to similar weather conditions?"
FAILURE_WORDS = ("closed", "lost pay", "could not", "failed", "cancel", "delay", "rejected", "crowded")


def derive_seed(seed: int, key: tuple) -> int:
    digest = hashlib.blake2b(repr((int(seed), *map(str, key))).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def unit_hash(seed: int, *parts: Any) -> float:
    return derive_seed(seed, parts) / 2.0**64


def _clip(v: float) -> float:
    return min(1.0, max(0.0, v))


def _r(v: float) -> float:
    return round(v, 4)


class OracleBackend(CognitionBackend):
    """Deterministic rule-table cognition."""

    def __init__(self, seed: int = 0, *, remote_bonus_km: float = 3.0, fear_weight: float = 0.8):
        self.seed = int(seed)
        self.remote_bonus_km = remote_bonus_km
        self.fear_weight = fear_weight
        self._rules: dict[str, Callable[[CognitionRequest, random.Random], Any]] = {
            "init_basic_needs": self._basic_needs,
            "init_high_level_needs": self._high_level_needs,
            "update_needs": self._update_needs,
            "generate_candidates": self._candidates,
            "score_candidates": self._score,
            "action_sequence": self._sequence,
            "agent_thoughts": self._thoughts,
            "update_emotion": self._emotion,
            "structure_experiences": self._structure,
            "memory_queries": self._queries,
            "abstract_strategies": self._strategies,
        }

    def respond(self, request: CognitionRequest) -> CognitionResponse:
        rule = self._rules[request.template]
        rng = random.Random(derive_seed(self.seed, request.key))
        doc = rule(request, rng)
        result = conform(request.template, doc)
        return CognitionResponse(result.structured, json.dumps(doc, sort_keys=True), result.conforming, result.issues)

    # --------------------------------------------------------- motivation

    def _basic_needs(self, req: CognitionRequest, rng: random.Random) -> dict:
        ctx = req.context
        prof = ctx.get("profile") or {}
        env = ctx.get("environment") or {}
        hour = float(env.get("hour", 8.0))
        hunger = 0.25 + (0.15 if 11 <= hour < 14 or 17 <= hour < 21 else 0.0)
        night = hour >= 21 or hour < 6
        fatigue = 0.55 if night else 0.15
        try:
            age = float(prof.get("age") or 35)
        except (TypeError, ValueError):
            age = 35.0
        fatigue += 0.1 if age >= 60 else 0.0
        if str(prof.get("health_status", "")).lower() in ("poor", "ill", "sick"):
            fatigue += 0.1
        hunger += rng.uniform(-0.05, 0.05)
        fatigue += rng.uniform(-0.05, 0.05)
        return {"hunger": _r(_clip(hunger)), "fatigue": _r(_clip(fatigue))}

    def _high_level_needs(self, req: CognitionRequest, rng: random.Random) -> dict:
        results = list(req.memory_results or [])
        if not results:
            return {"social_need": 0.5, "reasoning": "No social history available; assuming a neutral prior."}
        social_words = ("met", "visit", "call", "friend", "chat", "social")
        hits = sum(1 for r in results if any(w in r.lower() for w in social_words))
        if hits <= 2:
            value, why = 0.75, "Agent has limited recent social interactions."
        elif hits <= 5:
            value, why = 0.45, "Agent has a moderate amount of recent social contact."
        else:
            value, why = 0.3, "Agent has frequent recent social interactions."
        return {"social_need": value, "reasoning": why}

    def _event_topics(self, event: Mapping[str, Any]) -> list[str]:
        topics = [t.split(":", 1)[1] for t in event.get("tags", ()) if t.startswith("topic:")]
        if not topics:
            desc = str(event.get("description", "")).lower()
            topics = [topic for word, topic in KEYWORD_TOPICS if word in desc][:1]
        return topics

    def _update_needs(self, req: CognitionRequest, rng: random.Random) -> dict:
        ctx = req.context
        current = {k: float(v) for k, v in (ctx.get("current_needs") or {}).items()}
        events = ctx.get("events")
        if events is None:
            events = [{"kind": "active", "description": d} for d in ctx.get("active_events", [])]
            events += [{"kind": "passive", "description": d} for d in ctx.get("passive_events", [])]
        memory = [m.lower() for m in (req.memory_results or [])]
        per_event = []
        total: dict[str, float] = {}
        reasons = []
        for ev in events:
            deltas: dict[str, float] = {}
            cat = next((t.split(":", 1)[1] for t in ev.get("tags", ()) if t.startswith("category:")), None)
            if ev.get("kind") == "active" and cat in ACTION_EFFECTS and "failure" not in ev.get("tags", ()):
                deltas.update(ACTION_EFFECTS[cat])
            severity = next((float(t.split(":", 1)[1]) for t in ev.get("tags", ()) if t.startswith("severity:")), 1.0)
            for topic in self._event_topics(ev):
                scale = severity
                if topic in HABITUATING:
                    seen = sum(1 for m in memory if f"topic:{topic}" in m)
                    scale *= max(0.0, 1.0 - seen / HABITUATING[topic])
                for need, d in TOPIC_EFFECTS.get(topic, {}).items():
                    deltas[need] = deltas.get(need, 0.0) + d * scale
            deltas = {k: v for k, v in deltas.items() if k in current or f"{k}_need" in current}
            if deltas:
                per_event.append({"event": ev.get("description", ""), "deltas": deltas})
                reasons.append(f"{ev.get('description', 'event')} changed {', '.join(sorted(deltas))}")
                for k, v in deltas.items():
                    total[k] = total.get(k, 0.0) + v
        updated = dict(current)
        for k, v in total.items():
            key = k if k in current else f"{k}_need"
            updated[key] = _clip(current[key] + v)
        return {
            "updated_needs": updated,
            "reasoning": "; ".join(reasons) or "No event affected the agent's needs.",
            "event_deltas": per_event,
        }

    # ----------------------------------------------------------- planning

    def _candidates(self, req: CognitionRequest, rng: random.Random) -> list[dict]:
        ctx = req.context
        need = ctx.get("need")
        prof = ctx.get("profile") or {}
        loc = ctx.get("location")
        home = prof.get("home_poi")
        work = prof.get("work_poi")
        nearby = ctx.get("nearby") or {}
        ties = ctx.get("ties") or []
        at_home = loc is not None and loc == home

        def nearest(*cats: str) -> dict | None:
            best = None
            for c in cats:
                for entry in nearby.get(c, [])[:1]:
                    if best is None or entry["distance_km"] < best["distance_km"]:
                        best = entry
            return best

        def any_of(cat: str) -> dict | None:
            pool = nearby.get(cat, [])
            return pool[rng.randrange(len(pool))] if pool else None

        def go_or_stay(cid, travel_text, stay_text, target, category):
            if target is None or target == loc:
                return {"id": f"{cid}", "action": stay_text, "modality": REMOTE, "category": category}
            return {"id": f"{cid}", "action": travel_text, "target_poi": target, "modality": PHYSICAL, "category": category}

        out: list[dict] = []
        if need == "hunger":
            out.append(go_or_stay("eat_home", "Go home and cook dinner", "Cook a meal at home", home, "eat_home"))
            out.append({"id": "eat_delivery", "action": "Order food delivery", "modality": REMOTE, "category": "eat_delivery"})
            r = nearest("restaurant")
            if r:
                out.append({"id": f"eat_out:{r['poi_id']}", "action": "Visit a nearby restaurant",
                            "target_poi": r["poi_id"], "modality": PHYSICAL, "category": "eat_out"})
        elif need == "fatigue":
            out.append(go_or_stay("sleep", "Go home and sleep", "Sleep at home", home, "sleep"))
            out.append({"id": "rest", "action": "Take a short rest", "modality": REMOTE, "category": "rest"})
        elif need == "safety":
            g = nearest("grocery", "commerce")
            if g:
                out.append({"id": f"safety_supplies:{g['poi_id']}", "action": "Stock up on supplies at the store",
                            "target_poi": g["poi_id"], "modality": PHYSICAL, "category": "safety_supplies"})
            out.append(go_or_stay("safety_stay", "Go home and avoid crowds", "Stay home and avoid crowds", home, "safety_stay"))
        elif need == "esteem":
            if work:
                out.append(go_or_stay("work_office", "Go to work at the office", "Work at the office", work, "work_office"))
            out.append(go_or_stay("work_remote", "Go home and work remotely", "Work remotely from home", home, "work_remote"))
        elif need == "social":
            if ties:
                tie = ties[rng.randrange(len(ties))]
                if tie.get("home_poi") and tie["home_poi"] != loc:
                    out.append({"id": f"social_visit:{tie['agent_id']}", "action": f"Visit {tie['name']} at home",
                                "target_poi": tie["home_poi"], "modality": PHYSICAL, "category": "social_visit"})
            v = nearest("cafe", "restaurant", "park")
            if v:
                out.append({"id": f"social_venue:{v['poi_id']}", "action": f"Meet a friend at a nearby {v['category']}",
                            "target_poi": v["poi_id"], "modality": PHYSICAL, "category": "social_venue"})
            if ties:
                tie = ties[rng.randrange(len(ties))]
                out.append({"id": f"social_call:{tie['agent_id']}", "action": f"Call {tie['name']}",
                            "modality": REMOTE, "category": "social_call"})
            else:
                out.append({"id": "social_call", "action": "Chat with friends online", "modality": REMOTE, "category": "social_call"})
        elif need == "self_actualization":
            out.append(go_or_stay("leisure_home", "Go home and read a book", "Read a book at home", home, "leisure_home"))
            p = any_of("park")
            if p:
                out.append({"id": f"leisure_park:{p['poi_id']}", "action": "Spend time in a park",
                            "target_poi": p["poi_id"], "modality": PHYSICAL, "category": "leisure_park"})
            lrn = nearest("library", "gym")
            if lrn:
                out.append({"id": f"leisure_learn:{lrn['poi_id']}", "action": f"Go to the {lrn['category']}",
                            "target_poi": lrn["poi_id"], "modality": PHYSICAL, "category": "leisure_learn"})
        else:
            out.append({"id": "rest", "action": "Take a short rest", "modality": REMOTE, "category": "rest"})
        for c in out:
            if c.get("modality") == REMOTE:
                c.pop("target_poi", None)
        return out

    def _score(self, req: CognitionRequest, rng: random.Random) -> list[dict]:
        ctx = req.context
        cand = ctx.get("candidate") or {"description": ctx.get("action_description", ""), "category": "other"}
        desc = cand.get("description") or ctx.get("action_description", "")
        prof = ctx.get("profile") or {}
        hits = ctx.get("memory_hits") or []
        if not prof and not hits:
            return [{"action": desc, "attitude": 0.5, "subjective_norm": 0.5, "perceived_control": 0.5,
                     "reasoning": "No profile or memory available; uninformed prior."}]
        cat = cand.get("category", "other")
        att, norm, ctrl = BASE_SCORES.get(cat, (0.5, 0.5, 0.5))
        why = []
        agent = ctx.get("agent_id") or prof.get("id", "")
        affinity = unit_hash(self.seed, "affinity", agent, cat)
        att += 0.3 * (affinity - 0.5)
        physical = cand.get("modality") == PHYSICAL
        dist = float(ctx.get("distance_km") or 0.0)
        if physical:
            ctrl *= 0.35 + 0.65 * math.exp(-dist / 6.0)
            why.append(f"{dist:.1f} km away")
        elif float(ctx.get("nearest_physical_km") or 0.0) > self.remote_bonus_km:
            ctrl += 0.15
            why.append("remote option avoids a long trip")
        hour = float(ctx.get("hour", 12.0))
        if cat == "sleep":
            if hour >= 21 or hour < 7:
                att += 0.1
            else:
                att -= 0.5
                norm -= 0.3
                why.append("not bedtime")
        if str(ctx.get("weather", "")).lower() in ("rainy", "stormy") and cat in ("leisure_park", "social_venue"):
            att -= 0.2
            why.append("bad weather")
        needs = ctx.get("needs") or {}
        fear = max(0.0, float(needs.get("safety", 0.2)) - 0.2)
        if physical and fear > 0:
            att -= self.fear_weight * fear
            why.append("worried about going out")
        outcomes = [h for h in hits if h.get("level", 0) == 0 and f"category:{cat}" in h.get("tags", ())
                    and ("success" in h.get("tags", ()) or "failure" in h.get("tags", ()))]
        # weigh experiences gathered under comparable restrictions
        restricted = float(ctx.get("restriction_level") or 0.0) > 0
        outcomes = [h for h in outcomes if ("context:restricted" in h.get("tags", ())) == restricted]
        if outcomes:
            n = len(outcomes)
            rate = sum(1 for h in outcomes if "success" in h["tags"]) / n
            w = min(1.0, n / 3.0)
            att += 0.4 * w * (2 * rate - 1)
            ctrl += 0.25 * w * (2 * rate - 1)
            why.append(f"{n} past experiences, {rate:.0%} went well")
        for h in hits:
            if h.get("level", 0) > 0 and f"category:{cat}" in h.get("tags", ()):
                att += -0.1 if "avoid" in h.get("content", "").lower() else 0.05
                why.append(f"strategy: {h.get('content', '')}")
                break
        reasoning = "; ".join(why) or "routine option"
        return [{"action": desc, "attitude": _r(_clip(att)), "subjective_norm": _r(_clip(norm)),
                 "perceived_control": _r(_clip(ctrl)), "reasoning": reasoning}]

    def _sequence(self, req: CognitionRequest, rng: random.Random) -> list[dict]:
        ctx = req.context
        cand = ctx.get("candidate") or {}
        cat = cand.get("category", "other")
        target = None if ctx.get("relaxed") else cand.get("target_poi")
        prof = ctx.get("profile") or {}
        home = prof.get("home_poi")

        def step(verb, tgt, dur):
            return {"verb": verb, "target": tgt, "duration": dur}

        physical = cand.get("modality") == PHYSICAL and target is not None
        if cat == "eat_home":
            return [step("Return home", target, 1), step("Cook and eat dinner", None, 2)] if physical else [step("Cook and eat a meal", None, 3)]
        if cat == "eat_delivery":
            return [step("Order food delivery", None, 1), step("Eat the delivered meal", None, 1)]
        if cat == "eat_out":
            return [step("Eat at the restaurant", target, 2)] if physical else [step("Eat a snack", None, 1)]
        if cat == "sleep":
            # night sleep lasts until the morning wake-up; anything else is a nap
            hour = float(ctx.get("hour", 22.0))
            travel = 1 if physical else 0
            if hour >= 18 or hour < 5:
                dur = max(6, min(20, round(((WAKE_HOUR - hour) % 24) * 2) - travel))
            else:
                dur = 3
            return ([step("Return home", target, 1)] if physical else []) + [step("Sleep", None, dur)]
        if cat == "rest":
            return [step("Take a short rest", None, 2)]
        if cat == "work_office":
            return [step("Work at the office", target if physical else None, 14)]
        if cat == "work_remote":
            return ([step("Return home", target, 1)] if physical else []) + [step("Work remotely", None, 13)]
        if cat == "social_visit":
            return [step(cand.get("description", "Visit a friend"), target, 4)] if physical else [step("Message a friend", None, 1)]
        if cat == "social_venue":
            return [step("Meet a friend", target, 3)] if physical else [step("Message a friend", None, 1)]
        if cat == "social_call":
            return [step(cand.get("description", "Call a friend"), None, 2)]
        if cat in ("leisure_park", "leisure_learn"):
            return [step(cand.get("description", "Leisure"), target, 3)] if physical else [step("Relax", None, 2)]
        if cat == "leisure_home":
            return ([step("Return home", target, 1)] if physical else []) + [step("Read a book", None, 3)]
        if cat == "safety_supplies":
            return [step("Buy supplies", target, 1)] if physical else [step("Order supplies online", None, 1)]
        if cat == "safety_stay":
            return ([step("Return home", target, 1)] if physical else []) + [step("Stay home", None, 2)]
        return [step("rest", None, 1)]

    # ----------------------------------------------------------- learning

    def _thoughts(self, req: CognitionRequest, rng: random.Random) -> dict:
        desc = str(req.context.get("event_description", ""))
        low = desc.lower()
        if "cancel" in low:
            return {"thoughts": "I feel disappointed by the cancellation but understand the reasons.",
                    "attitude": "Negative towards last-minute changes.",
                    "reflection": "I should prepare backup plans in future."}
        if any(w in low for w in FAILURE_WORDS):
            return {"thoughts": f"I feel let down: {desc}.",
                    "attitude": "Negative towards this option under current conditions.",
                    "reflection": "I should consider alternatives next time."}
        if any(w in low for w in ("met", "visit", "call", "ate", "eat", "worked", "slept", "park")):
            return {"thoughts": f"That went well: {desc}.",
                    "attitude": "Positive towards this option.",
                    "reflection": "This is worth repeating."}
        return {"thoughts": "Nothing unusual happened.", "attitude": "Neutral.", "reflection": "Keep to my usual routine."}

    def _emotion(self, req: CognitionRequest, rng: random.Random) -> dict:
        current = str(req.context.get("current_emotion") or "neutral")
        recent = " ".join(map(str, req.context.get("recent_events") or [])).lower()
        memory = " ".join(req.memory_results or []).lower()
        if any(w in recent for w in FAILURE_WORDS):
            past = sum(memory.count(w) for w in FAILURE_WORDS)
            if past >= 2:
                return {"updated_emotion": "frustrated", "reasoning": "Repeated setbacks cause increased frustration."}
            return {"updated_emotion": "disappointed", "reasoning": "A plan did not work out."}
        if any(w in recent for w in ("met", "visit", "call")):
            return {"updated_emotion": "happy", "reasoning": "Spending time with others lifted the mood."}
        if recent:
            return {"updated_emotion": "content", "reasoning": "Things went as planned."}
        return {"updated_emotion": current, "reasoning": "Nothing changed."}

    def _structure(self, req: CognitionRequest, rng: random.Random) -> list[dict]:
        out = []
        for ev in req.context.get("events") or []:
            if isinstance(ev, str):
                ev = {"event": ev}
            out.append({"event": ev.get("event") or ev.get("description") or "event",
                        "emotion": ev.get("emotion") or "neutral",
                        "outcome": ev.get("outcome") or "no change"})
        return out

    def _queries(self, req: CognitionRequest, rng: random.Random) -> list[str]:
        ctx = req.context
        needs = ctx.get("needs") or {}
        active = ctx.get("activated_need")
        out: list[str] = []
        if active in NEED_QUERIES:
            out.append(NEED_QUERIES[active])
        for need in ("fatigue", "hunger", "social", "safety", "esteem"):
            if float(needs.get(need, 0.0)) >= 0.5 and NEED_QUERIES[need] not in out:
                out.append(NEED_QUERIES[need])
        if str(ctx.get("weather", "")).lower() in ("rainy", "stormy"):
            out.append(WEATHER_QUERY)
        return out or ["recent experiences"]

    def _strategies(self, req: CognitionRequest, rng: random.Random) -> dict:
        mems = [str(m).lower() for m in req.context.get("memories") or []]
        tags = set(req.context.get("tags") or [])
        text = " ".join(mems)
        found: list[str] = []
        if any(t.startswith("category:eat") for t in tags) or "eat" in text or "meal" in text:
            found.append("Prefer short trips when moderately hungry.")
        if ("rain" in text or "weather" in text) and ("social" in text or "friend" in text):
            found.append("Avoid outdoor social activities during bad weather.")
        if "isolat" in text or "without social contact" in text:
            found.append("Seek social support when feeling isolated.")
        if "restriction" in text or "closed" in text:
            found.insert(0, "Avoid crowded venues while restrictions are in place.")
        if "lost pay" in text:
            found.insert(0, "Go to the workplace when remote work does not pay off.")
        if not found:
            found.append("Repeat the routines that worked well before.")
        return {f"strategy_{i + 1}": s for i, s in enumerate(found)}
