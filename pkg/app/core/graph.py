"""Graph measures shared by the simulators and the analyze command."""

import logging
import math
from collections import Counter
from collections.abc import Iterable

import networkx as nx
import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import zeta

from app.core.config import get_settings
from app.core.errors import DomainError
from app.core.gna import GnaConfig

logger = logging.getLogger("workbench.graph")


def to_networkx(config: GnaConfig) -> nx.MultiDiGraph | nx.MultiGraph:
    """Convert a configuration; undirected link pairs become a single edge."""
    g = nx.MultiDiGraph() if config.directed else nx.MultiGraph()
    for v, state in config.states.items():
        g.add_node(v, state=state)
    for u, out in config.links.items():
        for d, s in out:
            if config.directed or u <= d:
                g.add_edge(u, d, state=s)
    return g


def _require_nodes(g: nx.Graph) -> None:
    if g.number_of_nodes() == 0:
        raise DomainError("graph has no nodes")


def simple_undirected(g: nx.Graph) -> nx.Graph:
    view = nx.Graph()
    view.add_nodes_from(g.nodes)
    view.add_edges_from((u, v) for u, v in g.edges() if u != v)
    return view


def closeness_centrality(g: nx.Graph, harmonic: bool = False) -> dict:
    """Closeness on the undirected simple view.

    ``harmonic=True`` sums inverse distances normalized by ``n - 1`` and stays
    defined on disconnected graphs.
    """
    _require_nodes(g)
    view = simple_undirected(g)
    if not harmonic:
        return nx.closeness_centrality(view)
    n = view.number_of_nodes()
    raw = nx.harmonic_centrality(view)
    scale = 1.0 / (n - 1) if n > 1 else 0.0
    return {v: c * scale for v, c in raw.items()}


def edge_betweenness(g: nx.Graph, normalized: bool = False) -> dict[tuple, float]:
    """Shortest-path betweenness of every edge of the undirected simple view."""
    _require_nodes(g)
    return nx.edge_betweenness_centrality(simple_undirected(g), normalized=normalized)


def weakly_connected_components(g: nx.Graph) -> list[set]:
    """Components of the undirected view, largest first, ties by smallest node."""
    _require_nodes(g)
    view = g.to_undirected(as_view=True) if g.is_directed() else g
    comps = [set(c) for c in nx.connected_components(view)]
    return sorted(comps, key=lambda c: (-len(c), min(c)))


def degree_histogram(g: nx.Graph | GnaConfig) -> dict[int, int]:
    if isinstance(g, GnaConfig):
        if not len(g):
            raise DomainError("graph has no nodes")
        degrees = g.degree_array().astype(int).tolist()
    else:
        _require_nodes(g)
        degrees = [d for _, d in g.degree()]
    return dict(sorted(Counter(degrees).items()))


def degree_centrality(g: nx.Graph) -> dict:
    _require_nodes(g)
    return nx.degree_centrality(simple_undirected(g))


def powerlaw_exponent_mle(degrees: Iterable[float], x_min: int | None = None) -> float:
    """Maximum-likelihood exponent of a discrete power law above ``x_min``.

    Uses the exact likelihood with the Hurwitz zeta normalizer.
    """
    if x_min is None:
        x_min = get_settings().POWERLAW_XMIN
    if x_min < 1:
        raise DomainError(f"x_min must be >= 1, got {x_min}")
    data = np.asarray([d for d in degrees if d >= x_min], dtype=float)
    if data.size == 0:
        raise DomainError(f"no observations at or above x_min={x_min}")
    n = data.size
    log_sum = float(np.log(data).sum())

    def negative_loglik(gamma: float) -> float:
        norm = zeta(gamma, x_min)
        if not math.isfinite(norm) or norm <= 0:
            return math.inf
        return n * math.log(norm) + gamma * log_sum

    result = minimize_scalar(negative_loglik, bounds=(1.0001, 10.0), method="bounded", options={"xatol": 1e-6})
    gamma = float(result.x)
    logger.debug("Power-law fit over %d observations (x_min=%d): gamma=%.4f", n, x_min, gamma)
    return gamma
