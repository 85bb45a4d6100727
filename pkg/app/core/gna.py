"""Generative network automata engine.

A configuration holds node states and an ordered out-link list per node.
Evolution is a sequence of rewriting events, each produced by an extraction
mechanism (which part of the network is rewritten) and a replacement
mechanism (what it becomes), then embedded back into the configuration.
Exactly one event is applied per step.
"""

import logging
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from typing import ClassVar, Iterator

import numpy as np

from app.core.errors import (
    ConfigError,
    DomainError,
    LookupFailure,
    ParameterError,
    ReplacementMissError,
    SchemaError,
    StaleEventError,
)

logger = logging.getLogger("workbench.engine")

PRESENT = "*"

Link = tuple[int, str]
Bridge = tuple[int, int, str]


class GnaConfig:
    """A timestamped network: node states, link lists and the step counter.

    Undirected models keep both directions of every link; ``directed=False``
    turns on the symmetry check.
    """

    __slots__ = ("states", "links", "time", "directed", "next_id", "alphabet", "_preds")

    def __init__(
        self,
        states: dict[int, str] | None = None,
        links: dict[int, list[Link]] | None = None,
        time: int = 0,
        directed: bool = True,
        next_id: int | None = None,
        alphabet=None,
    ):
        self.states: dict[int, str] = dict(states or {})
        links = links or {}
        unknown = set(links) - set(self.states)
        if unknown:
            raise SchemaError(f"links declared for unknown nodes: {sorted(unknown)}")
        self.links: dict[int, list[Link]] = {
            v: [(d, s) for d, s in links.get(v, ())] for v in self.states
        }
        if time < 0:
            raise SchemaError(f"time must be non-negative, got {time}")
        self.time = time
        self.directed = directed
        if next_id is None:
            next_id = max(self.states) + 1 if self.states else 0
        self.next_id = next_id
        self.alphabet = frozenset(alphabet) if alphabet is not None else None
        self._preds: dict[int, Counter] = {}
        self.validate()
        self._rebuild_preds()

    def _rebuild_preds(self) -> None:
        self._preds = {v: Counter() for v in self.states}
        for u, out in self.links.items():
            for d, _ in out:
                self._preds[d][u] += 1

    def validate(self) -> None:
        for u, out in self.links.items():
            for d, _ in out:
                if d not in self.states:
                    raise SchemaError(f"link {u}->{d} points outside the node set")
        if self.alphabet is not None:
            stray = {s for s in self.states.values() if s not in self.alphabet}
            if stray:
                raise SchemaError(f"states {sorted(stray)} are not in the alphabet")
        if self.states and self.next_id <= max(self.states):
            raise SchemaError("next_id must exceed every node id")
        if not self.directed:
            forward = Counter((u, d, s) for u, out in self.links.items() for d, s in out)
            backward = Counter((d, u, s) for u, d, s in forward.elements())
            if forward != backward:
                raise SchemaError("undirected configuration has asymmetric links")

    @property
    def nodes(self):
        return self.states.keys()

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, node: int) -> bool:
        return node in self.states

    def link_count(self) -> int:
        return sum(len(out) for out in self.links.values())

    def add_node(self, state: str, node_id: int | None = None) -> int:
        if node_id is None:
            node_id = self.next_id
        if node_id in self.states:
            raise SchemaError(f"node {node_id} already exists")
        self.states[node_id] = state
        self.links[node_id] = []
        self._preds[node_id] = Counter()
        self.next_id = max(self.next_id, node_id + 1)
        return node_id

    def add_link(self, src: int, dst: int, state: str = PRESENT) -> None:
        if src not in self.states or dst not in self.states:
            raise LookupFailure(f"link {src}->{dst} references a missing node")
        self.links[src].append((dst, state))
        self._preds[dst][src] += 1
        if not self.directed and src != dst:
            self.links[dst].append((src, state))
            self._preds[src][dst] += 1

    def in_neighbors(self, node: int) -> set[int]:
        return set(self._preds[node])

    def in_links(self, node: int) -> list[Link]:
        """Sorted ``(source, link state)`` pairs of the links into *node*."""
        return sorted((u, s) for u in self._preds[node] for d, s in self.links[u] if d == node)

    def out_neighbors(self, node: int) -> set[int]:
        return {d for d, _ in self.links[node]}

    def neighbors(self, node: int) -> set[int]:
        """Undirected view of adjacency."""
        return self.out_neighbors(node) | self.in_neighbors(node)

    def has_link(self, src: int, dst: int) -> bool:
        return self._preds[dst][src] > 0

    def degree(self, node: int) -> int:
        if not self.directed:
            return len(self.links[node])
        return len(self.links[node]) + sum(self._preds[node].values())

    def degree_array(self) -> np.ndarray:
        """Degrees in node-insertion order."""
        n = len(self.states)
        out = np.fromiter((len(v) for v in self.links.values()), dtype=float, count=n)
        if not self.directed:
            return out
        inn = np.fromiter((sum(c.values()) for c in self._preds.values()), dtype=float, count=n)
        return out + inn

    def subgna(self, nodes, seeds=()) -> "SubGna":
        chosen = sorted(set(nodes))
        members = set(chosen)
        missing = [v for v in chosen if v not in self.states]
        if missing:
            raise LookupFailure(f"nodes {missing} are not in the configuration")
        links = {v: [(d, s) for d, s in self.links[v] if d in members] for v in chosen}
        bridges: list[Bridge] = []
        for v in chosen:
            bridges.extend((v, d, s) for d, s in self.links[v] if d not in members)
        for v in chosen:
            for u in sorted(self._preds[v]):
                if u in members:
                    continue
                bridges.extend((u, v, s) for d, s in self.links[u] if d == v)
        return SubGna(
            states={v: self.states[v] for v in chosen},
            links=links,
            seeds=tuple(seeds),
            bridges=tuple(bridges),
            directed=self.directed,
            next_id=self.next_id,
        )

    def copy(self) -> "GnaConfig":
        clone = GnaConfig.__new__(GnaConfig)
        clone.states = dict(self.states)
        clone.links = {v: list(out) for v, out in self.links.items()}
        clone.time = self.time
        clone.directed = self.directed
        clone.next_id = self.next_id
        clone.alphabet = self.alphabet
        clone._preds = {v: Counter(c) for v, c in self._preds.items()}
        return clone

    def canonical(self) -> tuple:
        states = tuple(sorted(self.states.items()))
        links = tuple(sorted((u, d, s) for u, out in self.links.items() for d, s in out))
        return (self.directed, self.time, states, links)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GnaConfig):
            return NotImplemented
        return self.canonical() == other.canonical()

    def __repr__(self) -> str:
        return (
            f"GnaConfig(t={self.time}, nodes={len(self.states)}, "
            f"links={self.link_count()}, directed={self.directed})"
        )


@dataclass
class SubGna:
    """An induced sub-network plus the links crossing its boundary.

    ``seeds`` are the nodes the extraction mechanism picked directly; the
    rest of the node set is context.
    """

    states: dict[int, str] = field(default_factory=dict)
    links: dict[int, list[Link]] = field(default_factory=dict)
    seeds: tuple[int, ...] = ()
    bridges: tuple[Bridge, ...] = ()
    directed: bool = True
    next_id: int = 0

    @property
    def nodes(self):
        return self.states.keys()

    @property
    def is_empty(self) -> bool:
        return not self.states

    def __len__(self) -> int:
        return len(self.states)

    def link_triples(self) -> list[Bridge]:
        return sorted((u, d, s) for u, out in self.links.items() for d, s in out)

    def boundary(self) -> set[int]:
        inside = set(self.states)
        return {u if u not in inside else d for u, d, _ in self.bridges}

    def in_neighbors(self, node: int) -> set[int]:
        return {u for u, out in self.links.items() for d, _ in out if d == node}

    def same_shape(self, other: "SubGna") -> bool:
        return self.states == other.states and self.link_triples() == other.link_triples()


@dataclass
class RewriteEvent:
    old: SubGna
    new: SubGna
    correspondence: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        images = list(self.correspondence.values())
        if len(images) != len(set(images)):
            raise SchemaError("correspondence is not injective")
        stray = [o for o in self.correspondence if o not in self.old.states]
        if stray:
            raise SchemaError(f"correspondence domain {stray} outside the old sub-network")
        stray = [n for n in images if n not in self.new.states]
        if stray:
            raise SchemaError(f"correspondence range {stray} outside the new sub-network")

    @classmethod
    def identity(cls, sub: SubGna) -> "RewriteEvent":
        new = SubGna(
            states=dict(sub.states),
            links={v: list(out) for v, out in sub.links.items()},
            seeds=sub.seeds,
            directed=sub.directed,
            next_id=sub.next_id,
        )
        return cls(old=sub, new=new, correspondence={v: v for v in sub.states})

    @property
    def is_empty(self) -> bool:
        return self.old.is_empty and self.new.is_empty

    @property
    def is_identity(self) -> bool:
        if len(self.correspondence) != len(self.old.states):
            return False
        if any(o != n for o, n in self.correspondence.items()):
            return False
        return self.old.same_shape(self.new)


class Mechanism(ABC):
    """Base for extraction (E) and replacement (R) mechanisms.

    ``bounds`` maps a parameter name to its admissible ``(low, high)``.
    """

    kind: ClassVar[str] = ""
    family: ClassVar[str] = ""

    def __init__(self, params: dict | None = None, bounds: dict | None = None, stochastic: bool = True):
        self.params: dict[str, float] = dict(params or {})
        self.bounds: dict[str, tuple[float, float]] = dict(bounds or {})
        self.mode = "stochastic" if stochastic else "deterministic"
        for name, value in self.params.items():
            if name in self.bounds:
                low, high = self.bounds[name]
                if not low <= value <= high:
                    raise ParameterError(
                        f"{self.family or type(self).__name__}: {name}={value} outside [{low}, {high}]"
                    )

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "family": self.family or type(self).__name__,
            "mode": self.mode,
            "params": dict(sorted(self.params.items())),
        }


class ExtractionMechanism(Mechanism):
    kind = "extraction"
    # pure-creation mechanisms may select nothing
    creation: bool = False
    # add in-neighbors of the selection as context
    expand: bool = False
    requires_states: frozenset = frozenset()

    @abstractmethod
    def select(self, config: GnaConfig, rng: np.random.Generator) -> list[int] | None:
        """Return the chosen nodes, ``[]`` for a creation step, ``None`` when quiescent."""


class ReplacementMechanism(Mechanism):
    kind = "replacement"
    identity_fallback: bool = False

    @abstractmethod
    def rewrite(self, sub: SubGna, rng: np.random.Generator) -> RewriteEvent | None:
        """Return the event replacing ``sub``; ``None`` when no rule applies."""


def make_extraction(family: str, **params) -> ExtractionMechanism:
    from app.core.families import EXTRACTION_FAMILIES

    cls = EXTRACTION_FAMILIES.get(family)
    if cls is None:
        raise ConfigError(
            f"Unknown selection family: {family}. Must be one of {sorted(EXTRACTION_FAMILIES)}"
        )
    return cls(**params)


def extract(config: GnaConfig, e: ExtractionMechanism, rng: np.random.Generator) -> SubGna | None:
    if not len(config) and not e.creation:
        raise DomainError("cannot extract from an empty configuration")
    if e.requires_states and config.alphabet is not None:
        absent = e.requires_states - config.alphabet
        if absent:
            raise SchemaError(
                f"{e.family} requires states {sorted(absent)} absent from the alphabet"
            )
    selection = e.select(config, rng)
    if selection is None:
        return None
    members = set(selection)
    if e.expand:
        for v in selection:
            members |= config.in_neighbors(v)
    return config.subgna(members, seeds=tuple(selection))


def replace(sub: SubGna, r: ReplacementMechanism, rng: np.random.Generator) -> RewriteEvent:
    event = r.rewrite(sub, rng)
    if event is None:
        if r.identity_fallback:
            return RewriteEvent.identity(sub)
        raise ReplacementMissError(
            f"{r.family or type(r).__name__}: no rule applies to a sub-network of {len(sub)} nodes"
        )
    return event


def _check_current(config: GnaConfig, event: RewriteEvent) -> None:
    old = event.old
    for v, state in old.states.items():
        if config.states.get(v) != state:
            raise StaleEventError(f"node {v} of the event is absent or changed")
    members = set(old.states)
    for v in old.states:
        current = sorted((d, s) for d, s in config.links[v] if d in members)
        if current != sorted(old.links.get(v, ())):
            raise StaleEventError(f"links of node {v} no longer match the event")
    clash = [n for n in event.new.states if n in config.states and n not in members]
    if clash:
        raise StaleEventError(f"new nodes {clash} collide with existing nodes")


def embed(config: GnaConfig, event: RewriteEvent, inplace: bool = False) -> GnaConfig:
    """Replace ``event.old`` by ``event.new`` and re-attach the bridge links.

    Bridges keep their state and direction; bridges incident to old nodes
    without a correspondent are dropped.
    """
    _check_current(config, event)
    cfg = config if inplace else config.copy()
    old = set(event.old.states)
    corr = event.correspondence
    preds = cfg._preds

    # incoming bridges: rewrite the outside source's list in place
    sources = sorted({u for o in old for u in preds[o] if u not in old})
    rerouted: list[tuple[int, int]] = []
    for u in sources:
        kept: list[Link] = []
        for d, s in cfg.links[u]:
            if d in old:
                if d in corr:
                    kept.append((corr[d], s))
                    rerouted.append((u, corr[d]))
            else:
                kept.append((d, s))
        cfg.links[u] = kept

    outgoing: list[Bridge] = []
    for o in sorted(old):
        for d, s in cfg.links[o]:
            if d not in old:
                outgoing.append((o, d, s))
                preds[d][o] -= 1
                if preds[d][o] <= 0:
                    del preds[d][o]

    for o in old:
        del cfg.states[o]
        del cfg.links[o]
        del preds[o]

    for n, state in event.new.states.items():
        cfg.states[n] = state
        cfg.links[n] = []
        preds[n] = Counter()
    for n, out in event.new.links.items():
        for d, s in out:
            cfg.links[n].append((d, s))
            preds[d][n] += 1
    for u, n in rerouted:
        preds[n][u] += 1
    for o, d, s in outgoing:
        if o in corr:
            cfg.links[corr[o]].append((d, s))
            preds[d][corr[o]] += 1

    if event.new.states:
        cfg.next_id = max(cfg.next_id, max(event.new.states) + 1)
    cfg.time += 1
    return cfg


def step(
    config: GnaConfig,
    e: ExtractionMechanism,
    r: ReplacementMechanism,
    rng: np.random.Generator,
    inplace: bool = False,
) -> tuple[GnaConfig, RewriteEvent | None]:
    """One asynchronous rewriting step; the event is ``None`` when quiescent."""
    sub = extract(config, e, rng)
    if sub is None:
        return config, None
    event = replace(sub, r, rng)
    return embed(config, event, inplace=inplace), event


@dataclass
class Trajectory:
    initial: GnaConfig
    events: list[RewriteEvent] = field(default_factory=list)
    quiescent: bool = False
    final: GnaConfig | None = None
    snapshots: list[GnaConfig] | None = None

    def __len__(self) -> int:
        return len(self.events) + 1

    def configs(self) -> Iterator[GnaConfig]:
        """Yield every configuration in order, replaying events when needed."""
        if self.snapshots is not None:
            for cfg in self.snapshots:
                yield cfg.copy()
            return
        current = self.initial.copy()
        yield current.copy()
        for event in self.events:
            embed(current, event, inplace=True)
            yield current.copy()

    def pairs(self) -> Iterator[tuple[GnaConfig, GnaConfig]]:
        previous = None
        for cfg in self.configs():
            if previous is not None:
                yield previous, cfg
            previous = cfg

    def last(self) -> GnaConfig:
        if self.final is not None:
            return self.final.copy()
        cfg = self.initial.copy()
        for event in self.events:
            embed(cfg, event, inplace=True)
        return cfg


def run(
    initial: GnaConfig,
    e: ExtractionMechanism,
    r: ReplacementMechanism,
    steps: int,
    rng: np.random.Generator,
    keep_configs: bool = False,
) -> Trajectory:
    if steps < 0:
        raise ParameterError(f"steps must be >= 0, got {steps}")
    current = initial.copy()
    events: list[RewriteEvent] = []
    snapshots = [initial.copy()] if keep_configs else None
    quiescent = False
    for _ in range(steps):
        current, event = step(current, e, r, rng, inplace=True)
        if event is None:
            quiescent = True
            logger.info("Quiescent at t=%d after %d events", current.time, len(events))
            break
        events.append(event)
        if snapshots is not None:
            snapshots.append(current.copy())
    return Trajectory(
        initial=initial.copy(),
        events=events,
        quiescent=quiescent,
        final=current,
        snapshots=snapshots,
    )
