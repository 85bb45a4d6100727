"""Post-merger cultural integration on an adaptive social network.

Individuals of two firms carry cultural vectors and directed ties of
strength in (0, 1). In each action the focal individual listens to a source,
adopts the midpoint of the two vectors with a distance-dependent probability
and strengthens or weakens the tie in logit space; ties falling below the
removal threshold disappear.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist
from scipy.special import expit, logit

from app.core.errors import DomainError, InitError
from app.core.graph import closeness_centrality, edge_betweenness, weakly_connected_components
from app.core.rng import choice_index, make_rng, spawn_seeds
from app.core.snapshot import Snapshot, serialize
from app.models.schemas import MergerParams, MergerSweep

logger = logging.getLogger("workbench.merger")

REMOVAL_THRESHOLD = 0.01
LOCAL_PROB = 0.99
CENTRALITY_FLOOR = 1e-9
# largest and smallest doubles strictly inside (0, 1)
STRENGTH_CEILING = float(np.nextafter(1.0, 0.0))
STRENGTH_FLOOR = float(np.finfo(float).tiny)
METRIC_COLUMNS = ("cross_distance", "turnover", "conflict", "ineffectiveness")


@dataclass
class MergerState:
    params: MergerParams
    vectors: np.ndarray
    firms: np.ndarray
    ties: nx.DiGraph

    @property
    def size(self) -> int:
        return len(self.firms)

    def firm_index(self, node: int) -> int:
        """1-based position of an individual within its firm."""
        return node % self.params.n + 1


def acceptance_probability(d: float, d_c: float) -> float:
    if d < 0:
        raise DomainError(f"cultural distance must be >= 0, got {d}")
    if d_c <= 0:
        raise DomainError(f"d_c must be > 0, got {d_c}")
    return 0.5 ** (d / d_c)


def update_tie(s: float, accepted: bool) -> float:
    """Move ``s`` one unit in logit space.

    Long runs of acceptances would round to exactly 1.0; the result is held
    at the last double below it.
    """
    if not 0.0 < s < 1.0:
        raise DomainError(f"tie strength must lie in (0, 1), got {s}")
    moved = expit(logit(s) + (1.0 if accepted else -1.0))
    return float(np.clip(moved, STRENGTH_FLOOR, STRENGTH_CEILING))


def _wire(
    g: nx.DiGraph,
    sources: list[int],
    targets: list[int],
    weights: np.ndarray,
    quota: int,
    rng: np.random.Generator,
    label: str,
    target_weights: np.ndarray | None = None,
) -> None:
    """Add ``quota`` distinct directed ties; saturated sources are excluded from sampling."""
    capacity = sum(len([t for t in targets if t != s]) for s in sources)
    if quota > capacity:
        raise InitError(f"{label}: {quota} ties requested but only {capacity} distinct pairs exist")
    free = {s: [t for t in targets if t != s and not g.has_edge(s, t)] for s in sources}
    weights = np.asarray(weights, dtype=float).copy()
    tw = None if target_weights is None else dict(zip(targets, np.asarray(target_weights, dtype=float)))
    added = 0
    while added < quota:
        live = np.asarray([weights[i] if free[s] else 0.0 for i, s in enumerate(sources)])
        if live.sum() <= 0:
            raise InitError(f"{label}: tie quota unreachable after {added} ties")
        s = sources[choice_index(rng, live)]
        options = free[s]
        if tw is None:
            t = options[int(rng.integers(len(options)))]
        else:
            t = options[choice_index(rng, np.asarray([tw[o] for o in options]))]
        options.remove(t)
        g.add_edge(s, t, strength=float(rng.uniform(REMOVAL_THRESHOLD, 1.0 - REMOVAL_THRESHOLD)))
        added += 1


def init_population(p: MergerParams, rng: np.random.Generator) -> MergerState:
    n, dim = p.n, p.dimensions
    center_b = np.full(dim, p.separation / math.sqrt(dim))
    centers = np.vstack([np.zeros(dim), center_b])
    firms = np.repeat([0, 1], n)
    vectors = centers[firms] + rng.normal(0.0, p.noise_sd, size=(2 * n, dim))
    g = nx.DiGraph()
    g.add_nodes_from(range(2 * n))
    members = [list(range(n)), list(range(n, 2 * n))]
    index_weights = np.power(np.arange(1, n + 1) / n, p.w)
    for f in (0, 1):
        _wire(g, members[f], members[f], index_weights, p.within_ties, rng, f"firm {'AB'[f]} within-firm")
    closeness = []
    for f in (0, 1):
        c = closeness_centrality(g.subgraph(members[f]), harmonic=True)
        closeness.append(np.power(np.maximum([c[v] for v in members[f]], CENTRALITY_FLOOR), p.b))
    for f in (0, 1):
        o = 1 - f
        _wire(
            g, members[f], members[o], closeness[f], p.between_ties, rng,
            f"between-firm {'AB'[f]}->{'AB'[o]}", target_weights=closeness[o],
        )
    logger.debug("Initialized %d individuals, %d ties", 2 * n, g.number_of_edges())
    return MergerState(params=p, vectors=vectors, firms=firms, ties=g)


def individual_action(focal: int, state: MergerState, rng: np.random.Generator) -> MergerState:
    g = state.ties
    preds = list(g.pred[focal].items())
    if preds and rng.random() < LOCAL_PROB:
        strengths = np.asarray([d["strength"] for _, d in preds])
        source = preds[choice_index(rng, strengths)][0]
    else:
        component = nx.node_connected_component(g.to_undirected(as_view=True), focal) - {focal}
        if not component:
            return state
        pool = sorted(component)
        source = pool[int(rng.integers(len(pool)))]
        if not g.has_edge(source, focal):
            g.add_edge(source, focal, strength=REMOVAL_THRESHOLD)
    d = float(np.linalg.norm(state.vectors[focal] - state.vectors[source]))
    tie = g.edges[source, focal]
    if rng.random() < acceptance_probability(d, state.params.d_c):
        state.vectors[focal] = (state.vectors[focal] + state.vectors[source]) / 2.0
        tie["strength"] = update_tie(tie["strength"], True)
    else:
        strength = update_tie(tie["strength"], False)
        if strength < REMOVAL_THRESHOLD:
            g.remove_edge(source, focal)
        else:
            tie["strength"] = strength
    return state


def metrics(state: MergerState, with_betweenness: bool = True) -> dict:
    g = state.ties
    largest = weakly_connected_components(g)[0]
    inside = sorted(largest)
    firm_a = [v for v in inside if state.firms[v] == 0]
    firm_b = [v for v in inside if state.firms[v] == 1]
    if firm_a and firm_b:
        cross = float(cdist(state.vectors[firm_a], state.vectors[firm_b]).mean())
    else:
        cross = math.nan
    sub = g.subgraph(inside)
    conflict = 0.0
    distances = {}
    for u, v, data in sub.edges(data=True):
        d = float(np.linalg.norm(state.vectors[u] - state.vectors[v]))
        distances[u, v] = d
        conflict += d * data["strength"]
    ineffectiveness = math.nan
    if with_betweenness:
        betweenness = edge_betweenness(sub)
        ineffectiveness = 0.0
        for (u, v), d in distances.items():
            key = (u, v) if (u, v) in betweenness else (v, u)
            ineffectiveness += d * betweenness.get(key, 0.0)
    return {
        "cross_distance": cross,
        "turnover": state.size - len(largest),
        "conflict": conflict,
        "ineffectiveness": ineffectiveness,
    }


@dataclass
class MergerRun:
    series: list[dict] = field(default_factory=list)
    state: MergerState | None = None


def run(p: MergerParams, rng: np.random.Generator, metrics_every: int = 1) -> MergerRun:
    """Initialize, then sweep every individual once per iteration.

    Edge betweenness is recomputed every ``metrics_every`` iterations and at
    the last one; other iterations report it as NaN.
    """
    state = init_population(p, rng)
    result = MergerRun(state=state)
    result.series.append({"iteration": 0, **metrics(state)})
    for it in range(1, p.iterations + 1):
        order = rng.permutation(state.size) if p.shuffle else range(state.size)
        for focal in order:
            individual_action(int(focal), state, rng)
        full = it % metrics_every == 0 or it == p.iterations
        result.series.append({"iteration": it, **metrics(state, with_betweenness=full)})
    return result


def state_snapshot(state: MergerState) -> Snapshot:
    return Snapshot(
        directed=True,
        time=0,
        nodes=[
            (v, "AB"[int(state.firms[v])], {"vector": [round(float(x), 12) for x in state.vectors[v]]})
            for v in range(state.size)
        ],
        links=[
            (u, v, min(round(d["strength"], 12), STRENGTH_CEILING)) for u, v, d in state.ties.edges(data=True)
        ],
        meta={"firm_size": state.params.n},
    )


def _sweep_task(args: tuple) -> tuple[list[dict], str | None]:
    condition, params, seed, run_index, metrics_every, keep_snapshot = args
    result = run(MergerParams(**params), make_rng(seed), metrics_every)
    rows = [
        {"condition": condition, "w": params["w"], "b": params["b"], "run": run_index, **row}
        for row in result.series
    ]
    snap = None
    if keep_snapshot:
        snap = serialize(state_snapshot(result.state))
    return rows, snap


def run_sweep(
    sweep: MergerSweep, seed: int, workers: int = 1
) -> tuple[pd.DataFrame, dict[str, str]]:
    """Run every (w, b) condition ``sweep.runs`` times with independent streams.

    Returns the long-format metrics table and, when requested, final-network
    snapshots keyed by ``<condition>-run<k>``.
    """
    tasks = []
    conditions = [(w, b) for w in sweep.w for b in sweep.b]
    streams = spawn_seeds(seed, len(conditions) * sweep.runs)
    for c, (w, b) in enumerate(conditions):
        params = MergerParams(**{**sweep.overrides, "w": w, "b": b, "iterations": sweep.iterations})
        label = f"w={w:g},b={b:g}"
        for r in range(sweep.runs):
            tasks.append(
                (label, params.model_dump(), streams[c * sweep.runs + r], r, sweep.metrics_every, sweep.snapshots)
            )
    logger.info("Merger sweep: %d conditions x %d runs on %d workers", len(conditions), sweep.runs, workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    rows = [row for part, _ in results for row in part]
    snapshots = {
        f"{task[0]}-run{task[3]}": snap for task, (_, snap) in zip(tasks, results) if snap is not None
    }
    frame = pd.DataFrame(rows, columns=["condition", "w", "b", "run", "iteration", *METRIC_COLUMNS])
    return frame, snapshots


def state_from_snapshot(snap: Snapshot) -> MergerState:
    """Rebuild a state from a final-network snapshot for offline metrics."""
    n = int(snap.meta.get("firm_size", 0))
    if n <= 0 or len(snap.nodes) != 2 * n:
        raise DomainError("snapshot is not a merger network")
    nodes = sorted(snap.nodes, key=lambda node: node[0])
    vectors = np.asarray([node[2]["vector"] for node in nodes], dtype=float)
    firms = np.asarray([0 if node[1] == "A" else 1 for node in nodes])
    g = nx.DiGraph()
    g.add_nodes_from(range(2 * n))
    for u, v, strength in snap.links:
        g.add_edge(u, v, strength=float(strength))
    params = MergerParams(n=n, dimensions=vectors.shape[1])
    return MergerState(params=params, vectors=vectors, firms=firms, ties=g)
