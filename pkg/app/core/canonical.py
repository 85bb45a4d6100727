"""Isomorphism-invariant keys for sub-networks and content digests.

Nodes are colored by (state, seed flag) and refined by their labeled
neighborhoods. When the refined color cells leave few enough orderings the
key is exact (minimum encoding over all cell permutations, prefixed
``x:``); otherwise it is the refinement history (``wl:``), which can
collide for non-isomorphic inputs, so lookups confirm with a matcher.
"""

import hashlib
import itertools
import json
import math
from dataclasses import dataclass

import networkx as nx
from networkx.algorithms import isomorphism

from app.core.config import get_settings
from app.core.gna import SubGna


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)


def digest(payload) -> str:
    """Hex SHA-256 over the canonical JSON encoding of *payload*."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def _short(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class CanonicalForm:
    key: str
    order: tuple[int, ...]
    exact: bool


def _refine(sub: SubGna) -> tuple[dict[int, str], list[list[str]]]:
    seeds = set(sub.seeds)
    colors = {v: _short(canonical_json([s, v in seeds])) for v, s in sub.states.items()}
    preds: dict[int, list[tuple[int, str]]] = {v: [] for v in sub.states}
    for u, out in sub.links.items():
        for d, s in out:
            preds[d].append((u, s))
    history = [sorted(colors.values())]
    cells = len(set(colors.values()))
    for _ in range(len(sub.states)):
        refined = {}
        for v in sub.states:
            out_sig = sorted((s, colors[d]) for d, s in sub.links.get(v, ()))
            in_sig = sorted((s, colors[u]) for u, s in preds[v])
            refined[v] = _short(canonical_json([colors[v], out_sig, in_sig]))
        colors = refined
        history.append(sorted(colors.values()))
        count = len(set(colors.values()))
        if count == cells:
            break
        cells = count
    return colors, history


def _encode(sub: SubGna, order: tuple[int, ...]) -> tuple:
    pos = {v: i for i, v in enumerate(order)}
    seeds = set(sub.seeds)
    nodes = tuple((sub.states[v], v in seeds) for v in order)
    links = tuple(sorted((pos[u], pos[d], s) for u, out in sub.links.items() for d, s in out))
    return nodes, links, sub.directed


def canonical_form(sub: SubGna, limit: int | None = None) -> CanonicalForm:
    """Return the canonical key and a node order aligned with it.

    For exact keys, two isomorphic sub-networks yield orders that map onto
    each other position by position.
    """
    if limit is None:
        limit = get_settings().CANONICAL_EXACT_LIMIT
    if sub.is_empty:
        return CanonicalForm(key="x:" + digest([[], [], sub.directed]), order=(), exact=True)
    colors, history = _refine(sub)
    groups: dict[str, list[int]] = {}
    for v in sorted(sub.states):
        groups.setdefault(colors[v], []).append(v)
    cells = [groups[c] for c in sorted(groups)]
    orderings = math.prod(math.factorial(len(c)) for c in cells)
    if orderings > limit:
        order = tuple(v for cell in cells for v in cell)
        return CanonicalForm(key="wl:" + digest([history, sub.directed]), order=order, exact=False)
    best = None
    best_order: tuple[int, ...] = ()
    for combo in itertools.product(*(itertools.permutations(c) for c in cells)):
        order = tuple(v for cell in combo for v in cell)
        code = _encode(sub, order)
        if best is None or code < best:
            best, best_order = code, order
    return CanonicalForm(key="x:" + digest(best), order=best_order, exact=True)


def canonical_key(sub: SubGna, limit: int | None = None) -> str:
    return canonical_form(sub, limit).key


def to_multidigraph(sub: SubGna) -> nx.MultiDiGraph:
    g = nx.MultiDiGraph()
    seeds = set(sub.seeds)
    for v, s in sub.states.items():
        g.add_node(v, label=(s, v in seeds))
    for u, out in sub.links.items():
        for d, s in out:
            g.add_edge(u, d, label=s)
    return g


def match(query: SubGna, stored: SubGna) -> dict[int, int] | None:
    """Isomorphism from *query* nodes to *stored* nodes, or ``None``."""
    if len(query) != len(stored) or query.directed != stored.directed:
        return None
    matcher = isomorphism.MultiDiGraphMatcher(
        to_multidigraph(query),
        to_multidigraph(stored),
        node_match=isomorphism.categorical_node_match("label", None),
        edge_match=isomorphism.categorical_multiedge_match("label", None),
    )
    if not matcher.is_isomorphic():
        return None
    return dict(matcher.mapping)
