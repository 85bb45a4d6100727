"""Reference models expressed as extraction/replacement pairs.

Each builder returns a ``GnaModel`` (E, R, initial configuration). The
registry at the bottom validates parameters and is what the CLI and the
API resolve model names against.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from pydantic import BaseModel, ValidationError

from app.core.errors import ConfigError, ParameterError, SchemaError
from app.core.families import (
    FamilyExtraction,
    ForestFireExtraction,
    StatePairExtraction,
    state_param,
)
from app.core.gna import (
    PRESENT,
    ExtractionMechanism,
    GnaConfig,
    ReplacementMechanism,
    RewriteEvent,
    SubGna,
)
from app.core.rng import choice_index, make_rng
from app.models.schemas import (
    CaParams,
    DegreeStateParams,
    ForestFireParams,
    GrowthParams,
    ModelSpec,
    RbnParams,
    StateBasedParams,
)

logger = logging.getLogger("workbench.zoo")

BINARY = ("0", "1")


class GnaModel(NamedTuple):
    extraction: ExtractionMechanism
    replacement: ReplacementMechanism
    initial: GnaConfig


def _clone(sub: SubGna) -> SubGna:
    return SubGna(
        states=dict(sub.states),
        links={v: list(out) for v, out in sub.links.items()},
        seeds=sub.seeds,
        directed=sub.directed,
        next_id=sub.next_id,
    )


def _draw_state(rng: np.random.Generator, dist: dict[str, float]) -> str:
    keys = sorted(dist)
    if len(keys) == 1:
        return keys[0]
    return keys[choice_index(rng, np.asarray([dist[k] for k in keys], dtype=float))]


def _state_dist(red_prob: float) -> dict[str, float]:
    if red_prob <= 0.0:
        return {"0": 1.0}
    if red_prob >= 1.0:
        return {"1": 1.0}
    return {"0": 1.0 - red_prob, "1": red_prob}


# --- replacement mechanisms -----------------------------------------------


class AttachNewcomer(ReplacementMechanism):
    """Add one node linked to every seed; optionally recolor the seeds.

    An empty sub-network yields an isolated newcomer.
    """

    family = "attach_newcomer"

    def __init__(self, newcomer_states: dict[str, float] | None = None, recolor_prob: float = 0.0):
        super().__init__(params={"recolor_prob": recolor_prob}, bounds={"recolor_prob": (0.0, 1.0)})
        self.newcomer_states = dict(newcomer_states or {"0": 1.0})
        self.recolor_prob = recolor_prob
        if len(self.newcomer_states) == 1 and recolor_prob == 0.0:
            self.mode = "deterministic"

    def rewrite(self, sub: SubGna, rng: np.random.Generator) -> RewriteEvent:
        new = _clone(sub)
        u = sub.next_id
        new.states[u] = _draw_state(rng, self.newcomer_states)
        new.links[u] = []
        for v in sub.seeds:
            new.links[u].append((v, PRESENT))
            if not sub.directed:
                new.links[v].append((u, PRESENT))
        if self.recolor_prob > 0.0:
            for v in sub.seeds:
                if rng.random() < self.recolor_prob:
                    new.states[v] = _draw_state(rng, self.newcomer_states)
        return RewriteEvent(old=sub, new=new, correspondence={v: v for v in sub.states})

    def describe(self) -> dict:
        info = super().describe()
        info["newcomer_states"] = dict(sorted(self.newcomer_states.items()))
        return info


class PairLink(ReplacementMechanism):
    """Link the first seed to the second; an empty selection adds a newcomer."""

    family = "pair_link"

    def __init__(self, newcomer_states: dict[str, float] | None = None):
        super().__init__()
        self.newcomer_states = dict(newcomer_states or {"0": 1.0})

    def rewrite(self, sub: SubGna, rng: np.random.Generator) -> RewriteEvent | None:
        new = _clone(sub)
        if sub.is_empty:
            u = sub.next_id
            new.states[u] = _draw_state(rng, self.newcomer_states)
            new.links[u] = []
            return RewriteEvent(old=sub, new=new, correspondence={})
        if len(sub.seeds) < 2:
            return None
        a, b = sub.seeds[0], sub.seeds[1]
        new.links[a].append((b, PRESENT))
        if not sub.directed:
            new.links[b].append((a, PRESENT))
        return RewriteEvent(old=sub, new=new, correspondence={v: v for v in sub.states})


class MajorityRule(ReplacementMechanism):
    """Set the seed's state to the majority over its in-neighbors.

    The seed itself does not vote. Ties and an empty neighborhood keep the
    current state.
    """

    family = "majority"

    def __init__(self):
        super().__init__(stochastic=False)

    def rewrite(self, sub: SubGna, rng: np.random.Generator) -> RewriteEvent | None:
        if not sub.seeds:
            return None
        center = sub.seeds[0]
        votes = Counter(sub.states[u] for u in sub.in_neighbors(center))
        if not votes:
            return RewriteEvent.identity(sub)
        ranked = votes.most_common()
        top = ranked[0][1]
        leaders = [s for s, c in ranked if c == top]
        new = _clone(sub)
        if len(leaders) == 1:
            new.states[center] = leaders[0]
        return RewriteEvent(old=sub, new=new, correspondence={v: v for v in sub.states})


def rbn_state(table: str, output: str) -> str:
    return f"{table}:{output}"


def parse_rbn_state(state: str) -> tuple[str, str]:
    table, sep, output = state.partition(":")
    if not sep or output not in BINARY or any(c not in "01" for c in table):
        raise SchemaError(f"malformed boolean node state {state!r}")
    return table, output


class BooleanRule(ReplacementMechanism):
    """Recompute the seed's output from its inputs and its rule table.

    In-links carry the input position as link state; the table index is
    the sum of input outputs shifted by their position.
    """

    family = "boolean"

    def __init__(self):
        super().__init__(stochastic=False)

    def rewrite(self, sub: SubGna, rng: np.random.Generator) -> RewriteEvent | None:
        if not sub.seeds:
            return None
        center = sub.seeds[0]
        table, _ = parse_rbn_state(sub.states[center])
        idx = 0
        for u, out in sub.links.items():
            if u == center:
                continue
            for d, s in out:
                if d == center:
                    _, value = parse_rbn_state(sub.states[u])
                    idx |= int(value) << int(s)
        if idx >= len(table):
            raise SchemaError(f"rule table of node {center} has no entry {idx}")
        new = _clone(sub)
        new.states[center] = rbn_state(table, table[idx])
        return RewriteEvent(old=sub, new=new, correspondence={v: v for v in sub.states})


class DeleteSeeds(ReplacementMechanism):
    """Remove the seeds; their links and bridges go with them."""

    family = "delete"

    def __init__(self):
        super().__init__(stochastic=False)

    def rewrite(self, sub: SubGna, rng: np.random.Generator) -> RewriteEvent | None:
        if not sub.seeds:
            return None
        gone = set(sub.seeds)
        kept = [v for v in sub.states if v not in gone]
        new = SubGna(
            states={v: sub.states[v] for v in kept},
            links={v: [(d, s) for d, s in sub.links.get(v, ()) if d not in gone] for v in kept},
            directed=sub.directed,
            next_id=sub.next_id,
        )
        return RewriteEvent(old=sub, new=new, correspondence={v: v for v in kept})


# --- initial networks -----------------------------------------------------


def clique(size: int, state: str = "0", directed: bool = False, alphabet=None) -> GnaConfig:
    cfg = GnaConfig(directed=directed, alphabet=alphabet)
    for _ in range(size):
        cfg.add_node(state)
    for u in range(size):
        for v in range(u + 1, size):
            cfg.add_link(u, v)
            if directed:
                cfg.add_link(v, u)
    return cfg


def torus(width: int, height: int, states: list[str]) -> GnaConfig:
    """Von Neumann lattice with periodic boundaries; node id is ``y * width + x``."""
    cfg = GnaConfig(directed=True, alphabet=BINARY)
    for state in states:
        cfg.add_node(state)
    for y in range(height):
        for x in range(width):
            v = y * width + x
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                cfg.add_link(v, ((y + dy) % height) * width + (x + dx) % width)
    return cfg


# --- builders -------------------------------------------------------------


def ba_growth(n_final: int, links_per_node: int = 1, rng=None) -> GnaModel:
    """Preferential attachment from a seed clique until ``n_final`` nodes."""
    params = _validated(GrowthParams, n_final=n_final, links_per_node=links_per_node)
    e = FamilyExtraction("degree", {"alpha": 1.0}, size=params.links_per_node, limit=params.n_final)
    r = AttachNewcomer()
    return GnaModel(e, r, clique(params.links_per_node + 1, alphabet={"0"}))


def uniform_growth(n_final: int, links_per_node: int = 1, rng=None) -> GnaModel:
    params = _validated(GrowthParams, n_final=n_final, links_per_node=links_per_node)
    e = FamilyExtraction("uniform", size=params.links_per_node, limit=params.n_final)
    return GnaModel(e, AttachNewcomer(), clique(params.links_per_node + 1, alphabet={"0"}))


def async_ca(width: int = 20, height: int = 20, density: float = 0.5, rng=None) -> GnaModel:
    """Asynchronous majority automaton on a torus."""
    params = _validated(CaParams, width=width, height=height, density=density)
    rng = rng if rng is not None else make_rng(0)
    cells = params.width * params.height
    states = ["1" if x < params.density else "0" for x in rng.random(cells)]
    e = FamilyExtraction("uniform", expand=True)
    return GnaModel(e, MajorityRule(), torus(params.width, params.height, states))


def async_rbn(n: int = 30, k: int = 2, rule: str = "random", rng=None) -> GnaModel:
    """Asynchronous random boolean network with ``k`` distinct inputs per node."""
    params = _validated(RbnParams, n=n, k=k, rule=rule)
    rng = rng if rng is not None else make_rng(0)
    size = 2**params.k
    cfg = GnaConfig(directed=True)
    for _ in range(params.n):
        if params.rule == "identity":
            table = "".join(str(i & 1) for i in range(size))
        elif params.rule == "constant":
            table = "0" * size
        else:
            table = "".join(str(int(b)) for b in rng.integers(0, 2, size=size))
        cfg.add_node(rbn_state(table, str(int(rng.integers(0, 2)))))
    for v in range(params.n):
        pool = np.asarray([u for u in range(params.n) if u != v])
        inputs = sorted(int(u) for u in rng.choice(pool, size=params.k, replace=False)) if params.k else []
        for position, u in enumerate(inputs):
            cfg.add_link(u, v, str(position))
    return GnaModel(FamilyExtraction("uniform", expand=True), BooleanRule(), cfg)


def degree_state_growth(
    n_final: int = 200,
    modulation: float = 3.0,
    red_prob: float = 0.5,
    recolor_prob: float = 0.2,
    state_weights: dict[str, float] | None = None,
    rng=None,
) -> GnaModel:
    """Attachment weighted by degree times a state factor; red nodes get ``1 + modulation``."""
    params = _validated(
        DegreeStateParams,
        n_final=n_final,
        modulation=modulation,
        red_prob=red_prob,
        recolor_prob=recolor_prob,
        state_weights=state_weights,
    )
    weights = params.state_weights or {"1": 1.0 + params.modulation}
    family_params = {"alpha": 1.0}
    family_params.update({state_param(s): w for s, w in weights.items() if s != "0"})
    e = FamilyExtraction("degree_state", family_params, alphabet=list(BINARY), limit=params.n_final)
    r = AttachNewcomer(_state_dist(params.red_prob), recolor_prob=params.recolor_prob)
    initial = clique(2, alphabet=BINARY)
    initial.states[1] = "1"
    return GnaModel(e, r, initial)


def state_based_growth(
    n_initial: int = 10, newcomer_rate: float = 0.1, red_prob: float = 0.3, rng=None
) -> GnaModel:
    """Red nodes reach out to nodes they are not linked to; newcomers trickle in."""
    params = _validated(StateBasedParams, n_initial=n_initial, newcomer_rate=newcomer_rate, red_prob=red_prob)
    rng = rng if rng is not None else make_rng(0)
    cfg = GnaConfig(directed=False, alphabet=BINARY)
    cfg.add_node("1")
    for _ in range(params.n_initial - 1):
        cfg.add_node("1" if rng.random() < params.red_prob else "0")
    e = StatePairExtraction("1", params.newcomer_rate)
    return GnaModel(e, PairLink(_state_dist(params.red_prob)), cfg)


def forest_fire_growth(
    n_final: int = 200, burn_prob: float = 0.35, ambassadors: int = 1, rng=None
) -> GnaModel:
    params = _validated(ForestFireParams, n_final=n_final, burn_prob=burn_prob, ambassadors=ambassadors)
    e = ForestFireExtraction(params.burn_prob, params.ambassadors, limit=params.n_final)
    return GnaModel(e, AttachNewcomer(), clique(2, alphabet={"0"}))


def _validated(schema: type[BaseModel], **values):
    try:
        return schema(**values)
    except ValidationError as exc:
        raise ParameterError(f"{schema.__name__}: {exc.errors()[0]['msg']}") from exc


# --- registry -------------------------------------------------------------


@dataclass(frozen=True)
class ModelEntry:
    name: str
    builder: Callable[..., GnaModel]
    params: type[BaseModel]
    description: str
    default_steps: Callable[[BaseModel], int]


MODEL_REGISTRY: dict[str, ModelEntry] = {
    entry.name: entry
    for entry in (
        ModelEntry("ba", ba_growth, GrowthParams, "Preferential attachment growth",
                   lambda p: p.n_final - p.links_per_node - 1),
        ModelEntry("uniform_growth", uniform_growth, GrowthParams, "Uniform attachment growth",
                   lambda p: p.n_final - p.links_per_node - 1),
        ModelEntry("async_ca", async_ca, CaParams, "Asynchronous majority cellular automaton",
                   lambda p: 10 * p.width * p.height),
        ModelEntry("async_rbn", async_rbn, RbnParams, "Asynchronous random boolean network",
                   lambda p: 10 * p.n),
        ModelEntry("degree_state", degree_state_growth, DegreeStateParams,
                   "Degree and state modulated attachment", lambda p: p.n_final - 2),
        ModelEntry("state_based", state_based_growth, StateBasedParams,
                   "State-driven link formation", lambda p: 500),
        ModelEntry("forest_fire", forest_fire_growth, ForestFireParams, "Forest-fire growth",
                   lambda p: p.n_final - 2),
    )
}


def get_entry(name: str) -> ModelEntry:
    entry = MODEL_REGISTRY.get(name)
    if entry is None:
        raise ConfigError(f"Unknown model: {name}. Must be one of {sorted(MODEL_REGISTRY)}")
    return entry


def build_model(spec: ModelSpec | dict, rng: np.random.Generator | None = None) -> tuple[GnaModel, int]:
    """Resolve a model spec; returns the model and its default step count."""
    if isinstance(spec, dict):
        try:
            spec = ModelSpec(**spec)
        except ValidationError as exc:
            raise ConfigError(f"invalid model spec: {exc.errors()[0]['msg']}") from exc
    entry = get_entry(spec.model)
    params = _validated(entry.params, **spec.params)
    model = entry.builder(**params.model_dump(), rng=rng)
    logger.info("Built model %s with %d initial nodes", entry.name, len(model.initial))
    return model, entry.default_steps(params)


def list_models() -> list[dict]:
    return [
        {
            "name": e.name,
            "description": e.description,
            "params": e.params().model_dump(),
        }
        for e in MODEL_REGISTRY.values()
    ]
