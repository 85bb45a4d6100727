"""Operational network formation over a standby network of agents.

Each tick activates every executable event, counts active events down by
one time unit and commits those reaching zero: a directed link is added
(or its weight incremented) and knowledge moves according to the link type.
Events fire at most once; a scenario is quiescent once nothing is active
and nothing is executable.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from app.core.conditions import Condition, compile_condition
from app.core.errors import ConfigError, DomainError, LookupFailure
from app.core.graph import degree_centrality, weakly_connected_components
from app.core.snapshot import Snapshot
from app.models.schemas import Scenario

logger = logging.getLogger("workbench.opnet")

AGENT_CLASSES = ("sensor", "router", "actor", "database", "controller")
LINK_TYPES = ("Request", "Flow", "Task")
INFLUENCE_COLUMNS = (
    "node", "agent_class", "size", "fraction", "degree_centrality",
    "removal_components", "removal_largest_fraction",
)


@dataclass
class OpAgent:
    id: str
    sigma: list
    knowledge: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sigma or self.sigma[0] not in AGENT_CLASSES:
            raise ConfigError(
                f"Invalid agent class for {self.id}: {self.sigma[:1]}. Must be one of {list(AGENT_CLASSES)}"
            )

    @property
    def agent_class(self) -> str:
        return self.sigma[0]

    def heterotype(self, prefix: int) -> tuple:
        return tuple(self.sigma[:prefix])


@dataclass
class OpEvent:
    index: int
    source: str
    destination: str
    link_type: str
    name: str = ""
    conditions: Condition | None = None
    knowledge_required: list[str] = field(default_factory=list)
    knowledge_transferred: list[str] = field(default_factory=list)
    duration: int = 1
    duration_variation: int = 0

    def __post_init__(self):
        if self.link_type not in LINK_TYPES:
            raise ConfigError(f"Invalid link type: {self.link_type}. Must be one of {list(LINK_TYPES)}")
        if self.duration < 1:
            raise ConfigError(f"event {self.label}: duration must be >= 1")
        if self.duration_variation < 0:
            raise ConfigError(f"event {self.label}: duration variation must be >= 0")

    @property
    def label(self) -> str:
        return self.name or f"#{self.index}"


@dataclass
class Transfer:
    tick: int
    agent: str
    variable: str
    event: str


@dataclass
class OpState:
    agents: dict[str, OpAgent]
    events: list[OpEvent]
    standby: nx.Graph
    operational: nx.DiGraph = field(default_factory=nx.DiGraph)
    active: dict[int, int] = field(default_factory=dict)
    done: set[int] = field(default_factory=set)
    tasked: set[str] = field(default_factory=set)
    clock: int = 0
    heterotype_prefix: int = 3
    transfers: list[Transfer] = field(default_factory=list)
    name: str = "scenario"


def build_state(scenario: Scenario) -> OpState:
    agents = {a.id: OpAgent(a.id, list(a.sigma), dict(a.knowledge)) for a in scenario.agents}
    standby = nx.Graph()
    standby.add_nodes_from(agents)
    for u, v in scenario.standby:
        if u not in agents or v not in agents:
            raise ConfigError(f"standby link {u}-{v} references an unknown agent")
        standby.add_edge(u, v)
    events = []
    for i, ev in enumerate(scenario.events):
        for end in (ev.source, ev.destination):
            if end not in agents:
                raise ConfigError(f"event {ev.name or i}: unknown agent {end}")
        events.append(
            OpEvent(
                index=i,
                source=ev.source,
                destination=ev.destination,
                link_type=ev.link_type,
                name=ev.name,
                conditions=compile_condition(ev.conditions),
                knowledge_required=list(ev.knowledge_required),
                knowledge_transferred=list(ev.knowledge_transferred),
                duration=ev.duration,
                duration_variation=ev.duration_variation,
            )
        )
    logger.info("Scenario %s: %d agents, %d events", scenario.name, len(agents), len(events))
    return OpState(
        agents=agents,
        events=events,
        standby=standby,
        heterotype_prefix=scenario.heterotype_prefix,
        name=scenario.name,
    )


def executable(ev: OpEvent, st: OpState) -> bool:
    if ev.index in st.done or ev.index in st.active:
        return False
    source = st.agents[ev.source].knowledge
    if ev.conditions is not None:
        if not ev.conditions.evaluate(source, st.agents[ev.destination].knowledge):
            return False
    return all(var in source for var in ev.knowledge_required)


def sample_duration(ev: OpEvent, rng: np.random.Generator) -> int:
    if ev.duration_variation == 0:
        return ev.duration
    low = ev.duration - ev.duration_variation
    high = ev.duration + ev.duration_variation
    return max(1, int(rng.integers(low, high + 1)))


def _copy(st: OpState, src: str, dst: str, variables: list[str], ev: OpEvent) -> None:
    source = st.agents[src].knowledge
    target = st.agents[dst].knowledge
    for var in variables:
        if var in source:
            target[var] = source[var]
            st.transfers.append(Transfer(st.clock, dst, var, ev.label))


def _commit(st: OpState, ev: OpEvent) -> None:
    g = st.operational
    if g.has_edge(ev.source, ev.destination):
        data = g.edges[ev.source, ev.destination]
        data["weight"] += 1
        data["types"][ev.link_type] += 1
    else:
        g.add_edge(ev.source, ev.destination, weight=1, types=Counter({ev.link_type: 1}))
    if ev.link_type == "Request":
        _copy(st, ev.destination, ev.source, ev.knowledge_transferred, ev)
    elif ev.link_type == "Flow":
        _copy(st, ev.source, ev.destination, ev.knowledge_transferred, ev)
    else:
        st.tasked.add(ev.destination)
    st.done.add(ev.index)
    logger.debug("t=%d committed %s %s->%s", st.clock, ev.link_type, ev.source, ev.destination)


def tick(st: OpState, rng: np.random.Generator) -> OpState:
    for ev in st.events:
        if executable(ev, st):
            st.active[ev.index] = sample_duration(ev, rng)
    for idx in st.active:
        st.active[idx] -= 1
    finished = sorted(idx for idx, left in st.active.items() if left <= 0)
    for idx in finished:
        del st.active[idx]
        _commit(st, st.events[idx])
    st.clock += 1
    return st


def is_quiescent(st: OpState) -> bool:
    return not st.active and not any(executable(ev, st) for ev in st.events)


def run_to_quiescence(
    st: OpState, rng: np.random.Generator, max_ticks: int = 1000, on_tick=None
) -> tuple[OpState, int, bool]:
    """Tick until quiescent; the flag reports whether ``max_ticks`` cut the run short."""
    ticks = 0
    while not is_quiescent(st):
        if ticks >= max_ticks:
            logger.warning("Scenario %s hit max_ticks=%d with %d active events", st.name, max_ticks, len(st.active))
            return st, ticks, True
        tick(st, rng)
        ticks += 1
        if on_tick is not None:
            on_tick(st)
    logger.info("Scenario %s quiescent after %d ticks", st.name, ticks)
    return st, ticks, False


def entropy_of_counts(counts) -> float:
    counts = [c for c in counts if c > 0]
    if not counts:
        raise DomainError("entropy of an empty population")
    k = len(counts)
    if k == 1:
        return 0.0
    total = float(sum(counts))
    h = -math.fsum((c / total) * math.log(c / total) for c in counts)
    return min(max(h / math.log(k), 0.0), 1.0)


def network_entropy(agents, key_prefix_len: int) -> float:
    """Normalized heterotype entropy; 0 for a single heterotype."""
    agents = list(agents)
    if not agents:
        raise DomainError("network entropy needs at least one agent")
    return entropy_of_counts(Counter(a.heterotype(key_prefix_len) for a in agents).values())


def tick_metrics(st: OpState) -> dict:
    g = st.operational
    weights = [d["weight"] for _, _, d in g.edges(data=True)]
    members = [st.agents[v] for v in g.nodes]
    return {
        "tick": st.clock,
        "nodes": g.number_of_nodes(),
        "links": g.number_of_edges(),
        "total_weight": sum(weights),
        "max_weight": max(weights) if weights else 0,
        "min_weight": min(weights) if weights else 0,
        "avg_weight": (sum(weights) / len(weights)) if weights else 0.0,
        "heterotypes": len({a.heterotype(st.heterotype_prefix) for a in members}),
        "entropy": network_entropy(members, st.heterotype_prefix) if members else 0.0,
    }


def sphere_of_influence(st: OpState | nx.DiGraph, node) -> tuple[nx.DiGraph, dict]:
    """Closed radius-1 neighborhood with its induced links, and a size report."""
    g = st.operational if isinstance(st, OpState) else st
    if node not in g:
        raise LookupFailure(f"node {node} is not in the operational network")
    members = {node} | set(g.successors(node)) | set(g.predecessors(node))
    sphere = g.subgraph(members).copy()
    report = {
        "node": node,
        "size": len(members),
        "fraction": len(members) / g.number_of_nodes(),
        "degree_centrality": degree_centrality(g)[node],
    }
    return sphere, report


def removal_impact(st: OpState | nx.DiGraph, node) -> dict:
    """Fragmentation left behind when ``node`` drops out of the network.

    Components are weak; ``largest_fraction`` is the share of the remaining
    nodes that stay in the largest one.
    """
    g = st.operational if isinstance(st, OpState) else st
    if node not in g:
        raise LookupFailure(f"node {node} is not in the operational network")
    rest = g.copy()
    rest.remove_node(node)
    remaining = rest.number_of_nodes()
    if remaining == 0:
        return {"node": node, "components": 0, "largest_fraction": 0.0}
    comps = weakly_connected_components(rest)
    return {"node": node, "components": len(comps), "largest_fraction": len(comps[0]) / remaining}


def influence_table(st: OpState) -> list[dict]:
    g = st.operational
    if g.number_of_nodes() == 0:
        return []
    centrality = degree_centrality(g)
    rows = []
    for v in sorted(g.nodes):
        _, report = sphere_of_influence(g, v)
        report["degree_centrality"] = centrality[v]
        report["agent_class"] = st.agents[v].agent_class
        impact = removal_impact(g, v)
        report["removal_components"] = impact["components"]
        report["removal_largest_fraction"] = impact["largest_fraction"]
        rows.append(report)
    return rows


def state_snapshot(st: OpState) -> Snapshot:
    return Snapshot(
        directed=True,
        time=st.clock,
        nodes=[
            (v, st.agents[v].agent_class, {"tasked": True} if v in st.tasked else None)
            for v in st.operational.nodes
        ],
        links=[(u, v, d["weight"]) for u, v, d in st.operational.edges(data=True)],
        meta={"scenario": st.name},
    )
