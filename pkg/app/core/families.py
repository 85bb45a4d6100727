"""Node-selection families and the extraction mechanisms built on them.

A family turns per-node features (degree, state code) into unnormalized
selection weights. The same weights drive simulation and likelihood fitting,
so a mechanism fitted from a trace can be run back through the engine.
"""

import logging
from typing import ClassVar

import numpy as np

from app.core.errors import ConfigError, ParameterError
from app.core.gna import ExtractionMechanism, GnaConfig
from app.core.rng import choice_index

logger = logging.getLogger("workbench.families")

PARAM_BOUNDS = (0.0, 10.0)


def state_param(state: str) -> str:
    return f"w[{state}]"


class SelectionFamily:
    name: ClassVar[str] = ""
    implemented: ClassVar[bool] = True
    uses_degree: ClassVar[bool] = False
    uses_state: ClassVar[bool] = False

    def param_names(self, alphabet: list[str]) -> list[str]:
        names = ["alpha"] if self.uses_degree else []
        if self.uses_state:
            names.extend(state_param(s) for s in alphabet[1:])
        return names

    def default_params(self, alphabet: list[str]) -> dict[str, float]:
        return {name: 1.0 for name in self.param_names(alphabet)}

    def state_weights(self, params: dict, alphabet: list[str]) -> np.ndarray:
        # last slot covers states outside the alphabet
        weights = [1.0] + [params.get(state_param(s), 1.0) for s in alphabet[1:]] + [1.0]
        return np.asarray(weights, dtype=float)

    def weights(
        self, degrees: np.ndarray, codes: np.ndarray, params: dict, alphabet: list[str]
    ) -> np.ndarray:
        w = np.ones(len(degrees), dtype=float)
        if self.uses_degree:
            w = w * np.power(degrees, params.get("alpha", 1.0))
        if self.uses_state:
            w = w * self.state_weights(params, alphabet)[codes]
        return w


class UniformFamily(SelectionFamily):
    name = "uniform"


class DegreeFamily(SelectionFamily):
    name = "degree"
    uses_degree = True


class StateFamily(SelectionFamily):
    name = "state"
    uses_state = True


class DegreeStateFamily(SelectionFamily):
    name = "degree_state"
    uses_degree = True
    uses_state = True


class MotifFamily(SelectionFamily):
    """Declared extension point; selection by local motif is not defined yet."""

    name = "motif"
    implemented = False

    def weights(self, degrees, codes, params, alphabet):
        raise NotImplementedError("motif-based selection is not implemented")


SELECTION_FAMILIES: dict[str, SelectionFamily] = {
    f.name: f for f in (UniformFamily(), DegreeFamily(), StateFamily(), DegreeStateFamily(), MotifFamily())
}

DEFAULT_CANDIDATES = ("uniform", "degree", "state", "degree_state")


def get_family(name: str) -> SelectionFamily:
    family = SELECTION_FAMILIES.get(name)
    if family is None:
        raise ConfigError(f"Unknown selection family: {name}. Must be one of {sorted(SELECTION_FAMILIES)}")
    return family


def state_codes(states, alphabet: list[str]) -> np.ndarray:
    index = {s: i for i, s in enumerate(alphabet)}
    other = len(alphabet)
    return np.fromiter((index.get(s, other) for s in states), dtype=np.intp)


def draw_without_replacement(
    rng: np.random.Generator, weights: np.ndarray, k: int
) -> list[int]:
    weights = np.array(weights, dtype=float)
    picked: list[int] = []
    for _ in range(k):
        if not np.isfinite(weights).all() or weights.sum() <= 0:
            break
        idx = choice_index(rng, weights)
        picked.append(idx)
        weights[idx] = 0.0
    return picked


class FamilyExtraction(ExtractionMechanism):
    """Select ``size`` nodes sequentially without replacement by a family's weights.

    ``creation_prob`` gives the chance of an empty (pure creation) selection,
    ``size_dist`` replaces the fixed size with an empirical distribution and
    ``limit`` makes the mechanism quiescent once the network reaches that size.
    """

    def __init__(
        self,
        family: str = "uniform",
        params: dict | None = None,
        alphabet: list[str] | None = None,
        size: int = 1,
        expand: bool = False,
        creation_prob: float = 0.0,
        size_dist: dict[int, float] | None = None,
        limit: int | None = None,
    ):
        self.selection = get_family(family)
        if not self.selection.implemented:
            raise ConfigError(f"selection family {family} is declared but not implemented")
        self.family = family
        self.alphabet = list(alphabet or [])
        params = {**self.selection.default_params(self.alphabet), **(params or {})}
        bounds = {name: PARAM_BOUNDS for name in params}
        super().__init__(params=params, bounds=bounds, stochastic=True)
        if size < 1:
            raise ParameterError(f"selection size must be >= 1, got {size}")
        if not 0.0 <= creation_prob <= 1.0:
            raise ParameterError(f"creation_prob must lie in [0, 1], got {creation_prob}")
        self.size = size
        self.expand = expand
        self.creation_prob = creation_prob
        self.creation = creation_prob > 0.0
        self.size_dist = dict(size_dist) if size_dist else None
        self.limit = limit
        if self.selection.uses_state and self.alphabet:
            self.requires_states = frozenset(self.alphabet)

    def node_weights(self, config: GnaConfig) -> np.ndarray:
        codes = state_codes(config.states.values(), self.alphabet)
        return self.selection.weights(config.degree_array(), codes, self.params, self.alphabet)

    def _size(self, rng: np.random.Generator) -> int:
        if not self.size_dist:
            return self.size
        sizes = sorted(self.size_dist)
        probs = np.asarray([self.size_dist[k] for k in sizes], dtype=float)
        return sizes[choice_index(rng, probs)]

    def select(self, config: GnaConfig, rng: np.random.Generator) -> list[int] | None:
        if self.limit is not None and len(config) >= self.limit:
            return None
        if self.creation and rng.random() < self.creation_prob:
            return []
        if not len(config):
            return None
        nodes = list(config.states)
        picked = draw_without_replacement(rng, self.node_weights(config), self._size(rng))
        if not picked:
            return None
        return [nodes[i] for i in picked]

    def describe(self) -> dict:
        info = super().describe()
        info.update(
            size=self.size,
            expand=self.expand,
            creation_prob=self.creation_prob,
            size_dist={str(k): v for k, v in sorted((self.size_dist or {}).items())},
        )
        return info


class StatePairExtraction(ExtractionMechanism):
    """Pick a node in ``target_state`` and a second node not yet linked to it.

    With probability ``newcomer_rate`` the selection is empty instead, which
    lets the replacement introduce a new isolated node.
    """

    family = "state_pair"

    def __init__(self, target_state: str = "1", newcomer_rate: float = 0.1):
        super().__init__(params={"newcomer_rate": newcomer_rate}, bounds={"newcomer_rate": (0.0, 1.0)})
        self.target_state = target_state
        self.newcomer_rate = newcomer_rate
        self.creation = True
        self.requires_states = frozenset({target_state})

    def select(self, config: GnaConfig, rng: np.random.Generator) -> list[int] | None:
        if self.newcomer_rate > 0 and rng.random() < self.newcomer_rate:
            return []
        anchors = [v for v, s in config.states.items() if s == self.target_state]
        if not anchors:
            return []
        order = list(rng.permutation(len(anchors)))
        for i in order:
            anchor = anchors[i]
            taken = config.neighbors(anchor) | {anchor}
            others = [v for v in config.states if v not in taken]
            if others:
                return [anchor, others[int(rng.integers(len(others)))]]
        return None


class ForestFireExtraction(ExtractionMechanism):
    """Pick a uniform ambassador, then burn outward through unvisited neighbors.

    At each burning node the number of neighbors taken is geometric with mean
    ``burn_prob / (1 - burn_prob)``.
    """

    family = "forest_fire"

    def __init__(self, burn_prob: float = 0.35, ambassadors: int = 1, limit: int | None = None):
        super().__init__(params={"burn_prob": burn_prob}, bounds={"burn_prob": (0.0, 0.99)})
        if ambassadors < 1:
            raise ParameterError(f"ambassadors must be >= 1, got {ambassadors}")
        self.burn_prob = burn_prob
        self.ambassadors = ambassadors
        self.limit = limit

    def select(self, config: GnaConfig, rng: np.random.Generator) -> list[int] | None:
        if self.limit is not None and len(config) >= self.limit:
            return None
        nodes = list(config.states)
        if not nodes:
            return None
        count = min(self.ambassadors, len(nodes))
        start = [nodes[int(i)] for i in rng.choice(len(nodes), size=count, replace=False)]
        burned = list(start)
        visited = set(start)
        frontier = list(start)
        while frontier and self.burn_prob > 0:
            current = frontier.pop(0)
            fresh = sorted(config.neighbors(current) - visited)
            if not fresh:
                continue
            # failures before first success, success prob 1 - burn_prob
            take = int(rng.geometric(1.0 - self.burn_prob)) - 1
            take = min(take, len(fresh))
            if take <= 0:
                continue
            chosen = [fresh[int(i)] for i in rng.choice(len(fresh), size=take, replace=False)]
            for v in chosen:
                visited.add(v)
                burned.append(v)
                frontier.append(v)
        return burned


class EmptyExtraction(ExtractionMechanism):
    """Always selects nothing; growth models that only create use this."""

    family = "empty"
    creation = True

    def __init__(self, limit: int | None = None):
        super().__init__()
        self.limit = limit

    def select(self, config: GnaConfig, rng: np.random.Generator) -> list[int] | None:
        if self.limit is not None and len(config) >= self.limit:
            return None
        return []


EXTRACTION_FAMILIES = {
    "uniform": lambda **kw: FamilyExtraction(family="uniform", **kw),
    "degree": lambda **kw: FamilyExtraction(family="degree", **kw),
    "state": lambda **kw: FamilyExtraction(family="state", **kw),
    "degree_state": lambda **kw: FamilyExtraction(family="degree_state", **kw),
    "state_pair": StatePairExtraction,
    "forest_fire": ForestFireExtraction,
    "empty": EmptyExtraction,
}
