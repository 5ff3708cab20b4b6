"""Per-agent experiential memory.

Three stores share one node space: ``stream`` (append-only experiences),
``action_space`` (domain-tagged behavioural outcomes and abstracted
strategies) and ``state`` (versioned internal states). Nodes can be linked
symmetrically, and higher-level nodes abstract lower-level ones.

Retrieval is query driven: the agent formulates questions about its
situation and nodes are ranked by

    score = alpha * relevance + beta * recency + gamma * importance

with token-overlap (Jaccard) relevance and ``exp(-decay * age)`` recency.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .cognition import CognitionBackend, call
from .errors import CognitionError, ContractViolation, InvalidInputError
from .motivation import EventRecord

STORES = ("stream", "action_space", "state")
DEFAULT_DECAY = 0.01
BASE_IMPORTANCE = 0.5

_TOKEN = re.compile(r"[a-z0-9]+")
STOPWORDS = frozenset(
    "a an the and or of to in on at for with by from is are was were be been do did does i my me "
    "what how when which who this that these those it its as after before about have has had".split()
)


def tokenize(text: str) -> frozenset[str]:
    return frozenset(t for t in _TOKEN.findall(text.lower()) if t not in STOPWORDS)


def importance_for(need_change: float = 0.0) -> float:
    """Importance at write time: 0.5 baseline, +0.3 when a need moved by >= 0.2."""
    return BASE_IMPORTANCE + (0.3 if abs(need_change) >= 0.2 else 0.0)


@dataclass(frozen=True)
class MemoryNode:
    id: str
    store: str
    timestamp: int
    content: str
    tags: frozenset[str] = frozenset()
    importance: float = BASE_IMPORTANCE
    abstraction_level: int = 0
    sources: tuple[str, ...] = ()
    payload: Mapping[str, Any] = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        if self.store not in STORES:
            raise InvalidInputError(f"unknown memory store {self.store!r}")
        if not 0.0 <= self.importance <= 1.0:
            raise InvalidInputError("importance must be in [0, 1]")
        if self.abstraction_level < 0:
            raise InvalidInputError("abstraction_level must be >= 0")

    @property
    def text(self) -> str:
        return f"{self.content} [{', '.join(sorted(self.tags))}]" if self.tags else self.content


@dataclass(frozen=True)
class MemoryQuery:
    question: str
    tags: frozenset[str] | None = None
    limit: int = 5

    def __post_init__(self):
        if not self.question or not self.question.strip():
            raise InvalidInputError("memory query question must be non-empty")
        if self.limit < 1:
            raise InvalidInputError("memory query limit must be positive")


@dataclass
class RetrievalResult:
    nodes: list[MemoryNode] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.nodes)

    def texts(self) -> list[str]:
        return [n.text for n in self.nodes]

    def hits(self) -> list[dict]:
        return [
            {"id": n.id, "store": n.store, "content": n.content, "tags": sorted(n.tags),
             "level": n.abstraction_level, "timestamp": n.timestamp, "payload": dict(n.payload)}
            for n in self.nodes
        ]


class AgentMemory:
    """Node store plus retrieval index for one agent (single writer)."""

    def __init__(
        self,
        owner: str = "",
        *,
        alpha: float = 1 / 3,
        beta: float = 1 / 3,
        gamma: float = 1 / 3,
        decay: float = DEFAULT_DECAY,
        capacity: int | None = None,
    ):
        self.owner = owner
        self.alpha, self.beta, self.gamma = alpha, beta, gamma
        self.decay = decay
        self.capacity = capacity
        self.nodes: dict[str, MemoryNode] = {}
        self.links: dict[str, set[str]] = {}
        self._order: list[str] = []
        self._ids: list[str] = []
        self._pos: dict[str, int] = {}
        self._state_head: dict[str, str] = {}
        self._last_stream: tuple[int, str] | None = None
        self._token_index: dict[str, list[int]] = {}
        self._tag_index: dict[str, list[int]] = {}
        self._ts = np.zeros(64)
        self._imp = np.zeros(64)
        self._ntok = np.zeros(64)
        self._alive = np.zeros(64, dtype=bool)
        self._n = 0

    # ------------------------------------------------------------ storage

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def get(self, node_id: str) -> MemoryNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise InvalidInputError(f"unknown memory node {node_id!r}") from None

    def _add(self, node: MemoryNode) -> str:
        if node.id in self.nodes:
            raise InvalidInputError(f"duplicate memory node {node.id!r}")
        i = self._n
        if i == len(self._ts):
            grow = len(self._ts)
            self._ts = np.concatenate([self._ts, np.zeros(grow)])
            self._imp = np.concatenate([self._imp, np.zeros(grow)])
            self._ntok = np.concatenate([self._ntok, np.zeros(grow)])
            self._alive = np.concatenate([self._alive, np.zeros(grow, dtype=bool)])
        tokens = tokenize(node.content) | frozenset(t for tag in node.tags for t in tokenize(tag))
        self._ts[i] = node.timestamp
        self._imp[i] = node.importance
        self._ntok[i] = len(tokens)
        self._alive[i] = True
        for t in tokens:
            self._token_index.setdefault(t, []).append(i)
        for tag in node.tags:
            self._tag_index.setdefault(tag, []).append(i)
        self._n += 1
        self.nodes[node.id] = node
        self.links[node.id] = set()
        self._order.append(node.id)
        self._pos[node.id] = i
        self._ids.append(node.id)
        return node.id

    def _new_id(self) -> str:
        return f"{self.owner}:m{self._n:06d}" if self.owner else f"m{self._n:06d}"

    def _maybe_evict(self, now: int) -> None:
        if self.capacity is None:
            return
        while len(self.nodes) > self.capacity:
            heads = set(self._state_head.values())
            best = None
            for nid in self._order:
                node = self.nodes.get(nid)
                if node is None or node.store == "stream" or nid in heads or node.abstraction_level > 0:
                    continue
                s = self.beta * math.exp(-self.decay * max(0, now - node.timestamp)) + self.gamma * node.importance
                if best is None or s < best[0]:
                    best = (s, nid)
            if best is None:
                return
            self._evict(best[1])

    def _evict(self, node_id: str) -> None:
        for other in self.links.pop(node_id, set()):
            self.links[other].discard(node_id)
        del self.nodes[node_id]
        self._alive[self._pos[node_id]] = False
        self._order.remove(node_id)

    # --------------------------------------------------------- operations

    def append_stream(
        self,
        event: EventRecord,
        thoughts: str = "",
        emotion: str = "",
        outcome: str = "",
        *,
        tags: Iterable[str] = (),
        importance: float | None = None,
    ) -> str:
        """Create an immutable experience node; fields are kept in the payload."""
        parts = [event.description]
        if emotion:
            parts.append(f"felt {emotion}")
        if outcome:
            parts.append(outcome)
        if thoughts:
            parts.append(thoughts)
        node = MemoryNode(
            id=self._new_id(),
            store="stream",
            timestamp=event.timestamp,
            content="; ".join(parts),
            tags=frozenset({f"event:{event.kind}", *event.tags, *tags}),
            importance=BASE_IMPORTANCE if importance is None else importance,
            payload={"event": event.description, "emotion": emotion, "outcome": outcome, "thoughts": thoughts,
                     "kind": event.kind, "source": event.source},
        )
        nid = self._add(node)
        self._last_stream = (event.timestamp, nid)
        self._maybe_evict(event.timestamp)
        return nid

    def record_action_outcome(
        self,
        domain: str,
        action: Any,
        outcome: str,
        success: bool,
        *,
        timestamp: int,
        tags: Iterable[str] = (),
        importance: float | None = None,
    ) -> str:
        """Store a behavioural outcome under ``domain`` and link it to this tick's stream node."""
        desc = getattr(action, "description", str(action))
        category = getattr(action, "category", None)
        modality = getattr(action, "modality", None)
        node_tags = {f"domain:{domain}", "success" if success else "failure", *tags}
        if category:
            node_tags.add(f"category:{category}")
        if modality:
            node_tags.add(f"modality:{modality}")
        node = MemoryNode(
            id=self._new_id(),
            store="action_space",
            timestamp=timestamp,
            content=f"{desc}: {outcome}",
            tags=frozenset(node_tags),
            importance=BASE_IMPORTANCE if importance is None else importance,
            payload={"domain": domain, "action": desc, "outcome": outcome, "success": bool(success),
                     "category": category, "modality": modality},
        )
        nid = self._add(node)
        if self._last_stream is not None and self._last_stream[0] == timestamp and self._last_stream[1] in self.nodes:
            self.associate(nid, self._last_stream[1])
        self._maybe_evict(timestamp)
        return nid

    def update_state(self, key: str, value: str, reason: str = "", *, timestamp: int) -> str:
        """Write a new version of state ``key``, linked to the previous version."""
        prev = self._state_head.get(key)
        node = MemoryNode(
            id=self._new_id(),
            store="state",
            timestamp=timestamp,
            content=f"{key}: {value}" + (f" because {reason}" if reason else ""),
            tags=frozenset({"state", f"state:{key}"}),
            importance=BASE_IMPORTANCE,
            payload={"key": key, "value": value, "reason": reason, "previous": prev},
        )
        nid = self._add(node)
        self._state_head[key] = nid
        if prev is not None and prev in self.nodes:
            self.associate(nid, prev)
        return nid

    def current_state(self, key: str, default: str | None = None) -> str | None:
        head = self._state_head.get(key)
        return self.nodes[head].payload["value"] if head else default

    def state_history(self, key: str) -> list[MemoryNode]:
        """Versions of ``key`` from oldest to newest, following backward links."""
        out = []
        nid = self._state_head.get(key)
        while nid is not None and nid in self.nodes:
            node = self.nodes[nid]
            out.append(node)
            nid = node.payload.get("previous")
        return out[::-1]

    def associate(self, a: str, b: str) -> None:
        if a == b:
            raise ContractViolation("a node cannot be linked to itself")
        if a not in self.nodes or b not in self.nodes:
            raise ContractViolation(f"cannot link unknown nodes {a!r}, {b!r}")
        self.links[a].add(b)
        self.links[b].add(a)

    def neighbours(self, node_id: str) -> list[MemoryNode]:
        return [self.nodes[n] for n in sorted(self.links.get(node_id, ()))]

    def abstract(self, node_ids: Sequence[str], backend: CognitionBackend, *, timestamp: int, tags: Iterable[str] = ()) -> str:
        """Summarise at least two nodes into one higher-level strategy node.

        On backend failure no node is created and :class:`CognitionError` is raised.
        """
        ids = list(dict.fromkeys(node_ids))
        if len(ids) < 2:
            raise ContractViolation("abstraction needs at least two nodes")
        inputs = [self.get(i) for i in ids]
        ctx = {"memories": [n.content for n in inputs], "tags": sorted({t for n in inputs for t in n.tags})}
        response = call(backend, "abstract_strategies", ctx, key=tuple(ids[:2]))
        if response.structured is None:
            raise CognitionError("abstract_strategies returned no usable strategy")
        strategies = sorted(response.structured.items(), key=lambda kv: int(kv[0].split("_")[1]))
        content = strategies[0][1]
        shared = {t for t in inputs[0].tags if t.startswith(("category:", "domain:"))}
        for n in inputs[1:]:
            shared &= n.tags
        node = MemoryNode(
            id=self._new_id(),
            store="action_space",
            timestamp=timestamp,
            content=content,
            tags=frozenset({"abstraction", *shared, *tags}),
            importance=0.8,
            abstraction_level=1 + max(n.abstraction_level for n in inputs),
            sources=tuple(ids),
            payload={"strategies": [s for _, s in strategies]},
        )
        nid = self._add(node)
        for src in ids:
            self.associate(nid, src)
        return nid

    def formulate_queries(
        self, context: Mapping[str, Any], backend: CognitionBackend, *, max_queries: int = 3, limit: int = 5
    ) -> list[MemoryQuery]:
        """Self-posed retrieval questions about the current situation."""
        try:
            response = call(backend, "memory_queries", {"context": dict(context), **context})
            questions = [q for q in (response.structured or []) if q.strip()]
        except CognitionError:
            questions = []
        if not questions:
            questions = ["recent experiences"]
        return [MemoryQuery(q, None, limit) for q in questions[:max_queries]]

    # ---------------------------------------------------------- retrieval

    def score_all(self, query: MemoryQuery, now: int) -> tuple[np.ndarray, np.ndarray]:
        """(indices, scores) of every live node passing the tag filter."""
        n = self._n
        if n == 0:
            return np.empty(0, dtype=int), np.empty(0)
        mask = self._alive[:n].copy()
        if query.tags:
            tagged = np.zeros(n, dtype=bool)
            for tag in query.tags:
                idx = self._tag_index.get(tag)
                if idx:
                    tagged[idx] = True
            mask &= tagged
        q = tokenize(query.question)
        inter = np.zeros(n)
        for tok in q:
            idx = self._token_index.get(tok)
            if idx:
                inter[idx] += 1.0
        union = len(q) + self._ntok[:n] - inter
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
        age = np.maximum(0.0, now - self._ts[:n])
        rec = np.exp(-self.decay * age)
        scores = self.alpha * rel + self.beta * rec + self.gamma * self._imp[:n]
        idx = np.flatnonzero(mask)
        return idx, scores[idx]

    def retrieve(self, query: MemoryQuery, now: int) -> RetrievalResult:
        """Top ``query.limit`` nodes by score; ties go to the older node."""
        idx, scores = self.score_all(query, now)
        if idx.size == 0:
            return RetrievalResult()
        k = query.limit
        if idx.size > 4 * k:
            cut = np.partition(scores, idx.size - k)[idx.size - k]
            keep = scores >= cut
            idx, scores = idx[keep], scores[keep]
        order = np.lexsort((idx, -scores))[:k]
        nodes = [self.nodes[self._ids[i]] for i in idx[order]]
        return RetrievalResult(nodes, [float(s) for s in scores[order]])

    def retrieve_many(self, queries: Sequence[MemoryQuery], now: int, limit: int | None = None) -> RetrievalResult:
        """Union of several queries, keeping each node's best score."""
        best: dict[str, tuple[float, int, MemoryNode]] = {}
        for q in queries:
            res = self.retrieve(q, now)
            for node, s in zip(res.nodes, res.scores):
                prev = best.get(node.id)
                if prev is None or s > prev[0]:
                    best[node.id] = (s, self._pos[node.id], node)
        ranked = sorted(best.values(), key=lambda t: (-t[0], t[1]))
        if limit is not None:
            ranked = ranked[:limit]
        return RetrievalResult([t[2] for t in ranked], [t[0] for t in ranked])

    # -------------------------------------------------------------- dumps

    def nodes_between(self, start: int, stop: int) -> list[MemoryNode]:
        return [n for nid in self._order if start <= (n := self.nodes[nid]).timestamp < stop]

    def dump(self) -> list[dict]:
        out = []
        for nid in self._order:
            n = self.nodes[nid]
            out.append({
                "agent_id": self.owner,
                "id": n.id,
                "store": n.store,
                "timestamp": n.timestamp,
                "content": n.content,
                "tags": sorted(n.tags),
                "links": sorted(self.links[nid]),
                "importance": n.importance,
                "level": n.abstraction_level,
                "sources": list(n.sources),
                "payload": dict(n.payload),
            })
        return out

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, Any]], owner: str = "", **kwargs) -> "AgentMemory":
        mem = cls(owner, **kwargs)
        pending_links = []
        for r in records:
            node = MemoryNode(
                id=r["id"], store=r["store"], timestamp=int(r["timestamp"]), content=r["content"],
                tags=frozenset(r.get("tags", ())), importance=float(r.get("importance", BASE_IMPORTANCE)),
                abstraction_level=int(r.get("level", 0)), sources=tuple(r.get("sources", ())),
                payload=dict(r.get("payload", {})),
            )
            mem._add(node)
            if node.store == "state":
                mem._state_head[node.payload.get("key", node.id)] = node.id
            pending_links.extend((node.id, other) for other in r.get("links", ()))
        for a, b in pending_links:
            if a in mem.nodes and b in mem.nodes and a != b:
                mem.associate(a, b)
        return mem
