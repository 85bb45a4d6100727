"""Infer an extraction/replacement model from a series of configurations.

The pipeline detects one rewriting event per step, fits the extraction
mechanism by maximum likelihood over candidate selection families, tabulates
replacements by canonical left-hand side, and scores reconstructions with the
Bhattacharyya distance between extracted sub-network distributions.
"""

import itertools
import logging
import math
from collections import Counter, defaultdict
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np
from scipy.optimize import minimize_scalar

from app.core.canonical import canonical_form, canonical_json, match
from app.core.config import get_settings
from app.core.errors import (
    ConfigError,
    DomainError,
    NormalizationError,
    ParameterError,
    StaleEventError,
    TraceCorruptionError,
)
from app.core.families import (
    DEFAULT_CANDIDATES,
    PARAM_BOUNDS,
    FamilyExtraction,
    SelectionFamily,
    get_family,
    state_codes,
)
from app.core.gna import (
    PRESENT,
    GnaConfig,
    ReplacementMechanism,
    RewriteEvent,
    SubGna,
    Trajectory,
    embed,
    run,
)
from app.core.rng import choice_index, make_rng

logger = logging.getLogger("workbench.discovery")

# cores up to this size are scored over every draw order
MAX_EXACT_ORDER = 5
CRITERIA = ("likelihood", "bic")


# --- event detection ------------------------------------------------------


def _node_changed(g_t: GnaConfig, g_next: GnaConfig, v: int) -> bool:
    if g_t.states[v] != g_next.states[v]:
        return True
    if sorted(g_t.links[v]) != sorted(g_next.links[v]):
        return True
    return g_t.in_links(v) != g_next.in_links(v)


def _empty_event(g_t: GnaConfig) -> RewriteEvent:
    return RewriteEvent(
        old=SubGna(directed=g_t.directed, next_id=g_t.next_id),
        new=SubGna(directed=g_t.directed, next_id=g_t.next_id),
    )


def detect_event(g_t: GnaConfig, g_next: GnaConfig, verify: bool = True) -> RewriteEvent:
    """Recover the rewriting event that turns ``g_t`` into ``g_next``.

    The old side holds disappeared and changed nodes plus their in-neighbors;
    the seeds of the old side are the changed core before that expansion.
    """
    if g_t.directed != g_next.directed:
        raise TraceCorruptionError(f"t={g_t.time}: directed flag changes between snapshots")
    if g_next.time != g_t.time + 1:
        raise TraceCorruptionError(f"snapshot at t={g_next.time} does not follow t={g_t.time}")
    before, after = g_t.states, g_next.states
    disappeared = [v for v in before if v not in after]
    appeared = [v for v in after if v not in before]
    reused = sorted(v for v in appeared if v < g_t.next_id)
    if reused:
        raise TraceCorruptionError(f"t={g_t.time}: nodes {reused} reuse retired identities")
    changed = [v for v in before if v in after and _node_changed(g_t, g_next, v)]
    core = sorted(disappeared + changed)
    if not core and not appeared:
        return _empty_event(g_t)

    gone = set(disappeared)
    born = set(appeared)
    old_side = set(core)
    for v in core:
        old_side |= g_t.in_neighbors(v)
    new_side = born | set(changed)
    for v in list(new_side):
        new_side |= g_next.in_neighbors(v)
    shared = (old_side - gone) | (new_side - born)

    event = RewriteEvent(
        old=g_t.subgna(shared | gone, seeds=core),
        new=g_next.subgna(shared | born, seeds=[v for v in core if v in after]),
        correspondence={v: v for v in sorted(shared)},
    )
    if verify:
        try:
            replayed = embed(g_t, event)
        except StaleEventError as exc:
            raise TraceCorruptionError(f"t={g_t.time}: {exc}") from exc
        if replayed != g_next:
            raise TraceCorruptionError(f"t={g_t.time}: detected event does not replay to the successor")
    return event


def _regions(event: RewriteEvent) -> int:
    g = nx.Graph()
    for sub in (event.old, event.new):
        g.add_nodes_from(sub.states)
        g.add_edges_from((u, d) for u, d, _ in sub.link_triples())
    return nx.number_connected_components(g)


def trajectory_from_configs(configs: Sequence[GnaConfig]) -> Trajectory:
    """Wrap an observed configuration series; every step is detected and replay-checked."""
    if not configs:
        raise DomainError("a trajectory needs at least one configuration")
    events = [detect_event(a, b) for a, b in zip(configs, configs[1:])]
    return Trajectory(
        initial=configs[0].copy(),
        events=events,
        final=configs[-1].copy(),
        snapshots=[c.copy() for c in configs],
    )


def read_graphml_trace(paths: Sequence[str | Path]) -> Trajectory:
    """Load GraphML snapshots in the given order.

    String node ids map to engine ids in first-seen order; node and edge
    ``state`` attributes default to ``"0"`` and the present symbol.
    """
    ids: dict[str, int] = {}
    configs = []
    for t, path in enumerate(paths):
        try:
            graph = nx.read_graphml(str(path), node_type=str)
        except (OSError, nx.NetworkXError) as exc:
            raise ConfigError(f"cannot read GraphML snapshot {path}: {exc}") from exc
        for node in graph.nodes:
            ids.setdefault(str(node), len(ids))
        cfg = GnaConfig(time=t, directed=graph.is_directed(), next_id=len(ids))
        for node, attrs in graph.nodes(data=True):
            cfg.add_node(str(attrs.get("state", "0")), node_id=ids[str(node)])
        cfg.next_id = len(ids)
        for u, v, attrs in graph.edges(data=True):
            cfg.add_link(ids[str(u)], ids[str(v)], str(attrs.get("state", PRESENT)))
        configs.append(cfg)
    logger.info("Loaded %d GraphML snapshots with %d distinct nodes", len(configs), len(ids))
    return trajectory_from_configs(configs)


# --- training sets --------------------------------------------------------


@dataclass
class ExtractionSample:
    """Selection context at one step: a (degree, state) histogram of G_t and the core rows."""

    time: int
    rows: list[tuple[float, str]]
    counts: list[int]
    core: list[int]

    @classmethod
    def from_config(cls, cfg: GnaConfig, core: Sequence[int]) -> "ExtractionSample":
        hist = Counter(zip(cfg.degree_array().tolist(), cfg.states.values()))
        rows = sorted(hist)
        index = {row: i for i, row in enumerate(rows)}
        core_rows = [index[(float(cfg.degree(v)), cfg.states[v])] for v in core if v in cfg.states]
        return cls(time=cfg.time, rows=rows, counts=[hist[r] for r in rows], core=core_rows)


@dataclass
class TrainingSets:
    initial: GnaConfig
    extraction: list[ExtractionSample] = field(default_factory=list)
    replacement: list[RewriteEvent] = field(default_factory=list)
    alphabet: list[str] = field(default_factory=list)
    skipped: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.replacement)


def build_training(traj: Trajectory | Sequence[GnaConfig]) -> TrainingSets:
    configs = traj.configs() if isinstance(traj, Trajectory) else iter(traj)
    training = None
    states: set[str] = set()
    previous = None
    for cfg in configs:
        states.update(cfg.states.values())
        if previous is None:
            training = TrainingSets(initial=cfg.copy())
            previous = cfg
            continue
        event = detect_event(previous, cfg)
        if not event.is_empty:
            if _regions(event) > 1:
                logger.warning("Skipping t=%d: change spans disconnected regions", previous.time)
                training.skipped.append(previous.time)
            else:
                sample = ExtractionSample.from_config(previous, event.old.seeds)
                training.extraction.append(sample)
                training.replacement.append(event)
        previous = cfg
    if training is None:
        raise DomainError("empty trajectory")
    training.alphabet = sorted(states)
    logger.info(
        "Training sets: %d events, %d skipped, alphabet %s",
        len(training.replacement),
        len(training.skipped),
        training.alphabet,
    )
    return training


# --- extraction fitting ---------------------------------------------------


class SelectionLikelihood:
    """Log-likelihood of observed cores under a family, vectorized over samples.

    A core of size k is the outcome of k sequential draws without
    replacement; its probability sums over draw orders for small cores.
    """

    def __init__(self, samples: Sequence[ExtractionSample], alphabet: list[str]):
        if not samples:
            raise DomainError("no extraction samples to fit")
        self.alphabet = alphabet
        degrees: list[float] = []
        states: list[str] = []
        counts: list[int] = []
        starts: list[int] = []
        groups: dict[int, tuple[list, list]] = defaultdict(lambda: ([], []))
        for i, sample in enumerate(samples):
            base = len(degrees)
            starts.append(base)
            for (d, s), c in zip(sample.rows, sample.counts):
                degrees.append(d)
                states.append(s)
                counts.append(c)
            rows, ids = groups[len(sample.core)]
            rows.append([base + r for r in sample.core])
            ids.append(i)
        self.degrees = np.asarray(degrees, dtype=float)
        self.codes = state_codes(states, alphabet)
        self.counts = np.asarray(counts, dtype=float)
        self.starts = np.asarray(starts, dtype=np.intp)
        self.groups = {
            k: (np.asarray(rows, dtype=np.intp).reshape(len(ids), k), np.asarray(ids, dtype=np.intp))
            for k, (rows, ids) in groups.items()
        }
        self.n = len(samples)

    def loglik(self, family: SelectionFamily, params: dict) -> float:
        w = family.weights(self.degrees, self.codes, params, self.alphabet)
        z = np.add.reduceat(w * self.counts, self.starts)
        total = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            for k, (rows, ids) in self.groups.items():
                core_w = w[rows]
                zk = z[ids]
                orders = itertools.permutations(range(k)) if k <= MAX_EXACT_ORDER else [tuple(range(k))]
                prob = np.zeros(len(ids))
                for order in orders:
                    p = np.ones(len(ids))
                    taken = np.zeros(len(ids))
                    for j in order:
                        remaining = zk - taken
                        p = p * np.where(remaining > 0, core_w[:, j] / remaining, 0.0)
                        taken = taken + core_w[:, j]
                    prob += p
                total += float(np.sum(np.log(prob)))
        return total if not math.isnan(total) else -math.inf


@dataclass
class FamilyFit:
    family: str
    params: dict[str, float]
    loglik: float
    n_params: int
    score: float


@dataclass
class ExtractionFit:
    fits: list[FamilyFit]
    winner: FamilyFit
    criterion: str
    samples: int

    def as_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "samples": self.samples,
            "winner": self.winner.family,
            "candidates": [
                {
                    "family": f.family,
                    "params": f.params,
                    "loglik": f.loglik,
                    "n_params": f.n_params,
                    "score": f.score,
                }
                for f in self.fits
            ],
        }


def _maximize_1d(fn, low: float, high: float) -> tuple[float, float]:
    def negated(x):
        value = fn(x)
        return -value if math.isfinite(value) else 1e300

    result = minimize_scalar(negated, bounds=(low, high), method="bounded", options={"xatol": 1e-6})
    best_x, best = float(result.x), fn(float(result.x))
    for x in (low, high):
        value = fn(x)
        if value > best:
            best_x, best = x, value
    return best_x, best


def _fit_family(lik: SelectionLikelihood, family: SelectionFamily, max_sweeps: int = 100) -> tuple[dict, float]:
    names = family.param_names(lik.alphabet)
    params = family.default_params(lik.alphabet)
    current = lik.loglik(family, params)
    if not names:
        return params, current
    low, high = PARAM_BOUNDS
    for sweep in range(max_sweeps):
        previous = current
        for name in names:
            def along(x, name=name):
                return lik.loglik(family, {**params, name: x})

            x, value = _maximize_1d(along, low, high)
            if value >= current:
                params[name], current = x, value
        if len(names) == 1 or current - previous < 1e-9:
            break
    logger.debug("Fitted %s after %d sweeps: %s ll=%.6f", family.name, sweep + 1, params, current)
    return params, current


def fit_extraction(
    pairs: Sequence[ExtractionSample],
    candidates: Sequence[str] | None = None,
    criterion: str | None = None,
    alphabet: list[str] | None = None,
) -> ExtractionFit:
    """Fit each candidate family and pick the best.

    ``likelihood`` (the default) takes the raw maximum; ``bic`` subtracts half
    the parameter count times log(samples), which keeps a nested family such
    as degree-preferential from beating uniform on noise. Ties go to the
    earlier candidate.
    """
    criterion = criterion or get_settings().SELECTION_CRITERION
    if criterion not in CRITERIA:
        raise ConfigError(f"Invalid selection criterion: {criterion}. Must be one of {list(CRITERIA)}")
    pairs = [p for p in pairs if p.core]
    if alphabet is None:
        alphabet = sorted({s for p in pairs for _, s in p.rows})
    lik = SelectionLikelihood(pairs, alphabet)
    fits: list[FamilyFit] = []
    for name in candidates or DEFAULT_CANDIDATES:
        family = get_family(name)
        if not family.implemented:
            logger.warning("Candidate family %s is declared but not implemented; skipped", name)
            continue
        params, ll = _fit_family(lik, family)
        k = len(family.param_names(alphabet))
        score = ll - 0.5 * k * math.log(lik.n) if criterion == "bic" else ll
        fits.append(FamilyFit(name, params, ll, k, score))
    winner = None
    for fit in fits:
        if not math.isfinite(fit.score):
            continue
        if winner is None or fit.score > winner.score + 1e-9:
            winner = fit
    if winner is None:
        raise DomainError("every candidate family assigns zero probability to the observed selections")
    logger.info("Extraction fit over %d samples: %s wins (%s)", lik.n, winner.family, criterion)
    return ExtractionFit(fits=fits, winner=winner, criterion=criterion, samples=lik.n)


# --- replacement table ----------------------------------------------------


@dataclass
class Outcome:
    template: dict
    count: int = 0


@dataclass
class ReplacementClass:
    representative: SubGna
    order: tuple[int, ...]
    outcomes: dict[str, Outcome] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(o.count for o in self.outcomes.values())


def _template(event: RewriteEvent, position: dict[int, int]) -> dict:
    inverse = {n: o for o, n in event.correspondence.items()}
    fresh = sorted(n for n in event.new.states if n not in inverse)
    ref = {}
    for n in event.new.states:
        ref[n] = ["old", position[inverse[n]]] if n in inverse else ["fresh", fresh.index(n)]
    states = sorted([ref[n], s] for n, s in event.new.states.items())
    links = sorted([ref[u], ref[d], s] for u, out in event.new.links.items() for d, s in out)
    return {"states": states, "links": links}


class ReplacementTable:
    """Canonical left-hand side -> observed outcomes with frequencies."""

    def __init__(self, limit: int | None = None):
        self.limit = limit
        self.entries: dict[str, list[ReplacementClass]] = {}

    def __len__(self) -> int:
        return sum(len(v) for v in self.entries.values())

    def _find(self, sub: SubGna) -> tuple[ReplacementClass | None, dict[int, int] | None, object]:
        form = canonical_form(sub, self.limit)
        classes = self.entries.get(form.key, [])
        if form.exact:
            if not classes:
                return None, None, form
            return classes[0], {v: i for i, v in enumerate(form.order)}, form
        for cls in classes:
            mapping = match(sub, cls.representative)
            if mapping is not None:
                pos = {v: i for i, v in enumerate(cls.order)}
                return cls, {v: pos[mapping[v]] for v in sub.states}, form
        return None, None, form

    def add(self, event: RewriteEvent) -> None:
        cls, position, form = self._find(event.old)
        if cls is None:
            cls = ReplacementClass(representative=event.old, order=form.order)
            self.entries.setdefault(form.key, []).append(cls)
            position = {v: i for i, v in enumerate(form.order)}
        template = _template(event, position)
        key = canonical_json(template)
        outcome = cls.outcomes.setdefault(key, Outcome(template=template))
        outcome.count += 1

    def lookup(self, sub: SubGna, mode: str = "deterministic", rng: np.random.Generator | None = None) -> RewriteEvent | None:
        cls, position, _ = self._find(sub)
        if cls is None:
            return None
        outcomes = list(cls.outcomes.values())
        if mode == "stochastic":
            if rng is None:
                raise ParameterError("stochastic lookup needs a random source")
            chosen = outcomes[choice_index(rng, np.asarray([o.count for o in outcomes], dtype=float))]
        else:
            chosen = max(outcomes, key=lambda o: o.count)
        return _instantiate(chosen.template, sub, position)

    def summary(self) -> list[dict]:
        rows = []
        for key in sorted(self.entries):
            for cls in self.entries[key]:
                rows.append(
                    {
                        "key": key,
                        "nodes": len(cls.representative),
                        "observations": cls.total,
                        "outcomes": sorted(o.count for o in cls.outcomes.values())[::-1],
                    }
                )
        return rows


def _instantiate(template: dict, sub: SubGna, position: dict[int, int]) -> RewriteEvent:
    node_at = {i: v for v, i in position.items()}

    def resolve(ref) -> int:
        kind, idx = ref
        return node_at[idx] if kind == "old" else sub.next_id + idx

    states = {resolve(ref): s for ref, s in template["states"]}
    links: dict[int, list] = {n: [] for n in states}
    for src, dst, s in template["links"]:
        links[resolve(src)].append((resolve(dst), s))
    new = SubGna(
        states=states,
        links=links,
        seeds=tuple(v for v in sub.seeds if v in states),
        directed=sub.directed,
        next_id=sub.next_id,
    )
    kept = {node_at[idx]: node_at[idx] for (kind, idx), _ in template["states"] if kind == "old"}
    return RewriteEvent(old=sub, new=new, correspondence=kept)


def build_replacement(triples: Sequence[RewriteEvent], limit: int | None = None) -> ReplacementTable:
    if not triples:
        raise DomainError("no replacement triples to tabulate")
    table = ReplacementTable(limit=limit)
    for event in triples:
        table.add(event)
    logger.info("Replacement table: %d classes from %d events", len(table), len(triples))
    return table


class FittedReplacement(ReplacementMechanism):
    """Replays tabulated outcomes; unseen left-hand sides map to identity.

    ``lookups`` and ``misses`` count table queries over the mechanism's life.
    """

    family = "table"
    identity_fallback = True

    def __init__(self, table: ReplacementTable, mode: str = "deterministic"):
        super().__init__(stochastic=mode == "stochastic")
        self.table = table
        self.lookups = 0
        self.misses = 0

    def rewrite(self, sub: SubGna, rng: np.random.Generator) -> RewriteEvent | None:
        self.lookups += 1
        event = self.table.lookup(sub, self.mode, rng)
        if event is None:
            self.misses += 1
        return event


# --- scoring --------------------------------------------------------------


def _as_mapping(dist) -> dict:
    if isinstance(dist, Mapping):
        return dict(dist)
    return dict(enumerate(dist))


def bhattacharyya(p, q) -> float:
    """Bhattacharyya distance between two distributions; ``inf`` on disjoint supports."""
    p, q = _as_mapping(p), _as_mapping(q)
    for name, dist in (("p", p), ("q", q)):
        values = list(dist.values())
        if any(v < 0 for v in values):
            raise NormalizationError(f"{name} has negative probabilities")
        total = math.fsum(values)
        if abs(total - 1.0) > 1e-9:
            raise NormalizationError(f"{name} sums to {total}, not 1")
    if p == q:
        return 0.0
    coefficient = math.fsum(math.sqrt(p[k] * q[k]) for k in p.keys() & q.keys())
    if coefficient <= 0.0:
        return math.inf
    return max(-math.log(coefficient), 0.0)


def selected_core(sub: SubGna) -> SubGna:
    """The seeds of ``sub`` with the links among them; context and bridges dropped."""
    seeds = set(sub.seeds)
    return SubGna(
        states={v: sub.states[v] for v in sub.seeds},
        links={v: [(d, s) for d, s in sub.links.get(v, ()) if d in seeds] for v in sub.seeds},
        seeds=sub.seeds,
        directed=sub.directed,
        next_id=sub.next_id,
    )


def core_distribution(subs, limit: int | None = None) -> dict[str, float]:
    """Frequencies of canonical core keys; an empty core stands for pure creation."""
    counts = Counter(canonical_form(selected_core(sub), limit).key for sub in subs)
    total = sum(counts.values())
    return {k: c / total for k, c in sorted(counts.items())} if total else {}


def key_distribution(training: TrainingSets, limit: int | None = None) -> dict[str, float]:
    """Core-key distribution of the detected events of a trace."""
    return core_distribution((e.old for e in training.replacement), limit)


def extraction_distribution(traj: Trajectory, limit: int | None = None) -> dict[str, float]:
    """Core-key distribution of what an engine run extracted, identity steps included."""
    return core_distribution((e.old for e in traj.events), limit)


# --- full model -----------------------------------------------------------


@dataclass
class FittedModel:
    extraction: ExtractionFit | None
    creation_prob: float
    size_dist: dict[int, float]
    table: ReplacementTable
    mode: str
    initial: GnaConfig
    alphabet: list[str]
    events: int
    skipped: list[int] = field(default_factory=list)
    training: TrainingSets | None = None
    reconstruction: dict | None = None

    def extraction_mechanism(self) -> FamilyExtraction:
        if self.extraction is None:
            return FamilyExtraction("uniform", creation_prob=1.0)
        size = max(self.size_dist, key=lambda k: (self.size_dist[k], -k))
        return FamilyExtraction(
            self.extraction.winner.family,
            dict(self.extraction.winner.params),
            alphabet=self.alphabet,
            size=size,
            expand=True,
            creation_prob=self.creation_prob,
            size_dist=self.size_dist if len(self.size_dist) > 1 else None,
        )

    def replacement_mechanism(self) -> FittedReplacement:
        return FittedReplacement(self.table, self.mode)

    def report(self, distance: float | None = None) -> dict:
        return {
            "events": self.events,
            "skipped_steps": self.skipped,
            "alphabet": self.alphabet,
            "creation_prob": self.creation_prob,
            "size_dist": {str(k): v for k, v in sorted(self.size_dist.items())},
            "extraction": self.extraction.as_dict() if self.extraction else None,
            "replacement": {
                "mode": self.mode,
                "classes": len(self.table),
                "entries": self.table.summary(),
            },
            "reconstruction": self.reconstruction,
            "distance": None if distance is None else (
                "inf" if math.isinf(distance) else distance
            ),
        }

    def report_text(self, distance: float | None = None) -> str:
        lines = [f"events: {self.events} (skipped {len(self.skipped)})"]
        lines.append(f"creation probability: {self.creation_prob:.4f}")
        if self.extraction:
            lines.append(f"selection criterion: {self.extraction.criterion}")
            for fit in self.extraction.fits:
                mark = "*" if fit is self.extraction.winner else " "
                params = ", ".join(f"{k}={v:.4f}" for k, v in sorted(fit.params.items())) or "-"
                lines.append(f" {mark} {fit.family:<13} loglik={fit.loglik:.4f} score={fit.score:.4f} {params}")
            lines.append(f"extraction family: {self.extraction.winner.family}")
        lines.append(f"replacement classes: {len(self.table)} ({self.mode})")
        if self.reconstruction:
            rec = self.reconstruction
            lines.append(f"reconstruction: {rec['steps']} steps, {rec['misses']} of {rec['lookups']} lookups missed")
        if distance is not None:
            lines.append(f"bhattacharyya distance: {distance:.6f}")
        return "\n".join(lines) + "\n"


def discover(
    traj: Trajectory | Sequence[GnaConfig],
    candidates: Sequence[str] | None = None,
    mode: str = "deterministic",
    criterion: str | None = None,
) -> FittedModel:
    if mode not in ("deterministic", "stochastic"):
        raise ConfigError(f"Invalid lookup mode: {mode}. Must be one of ['deterministic', 'stochastic']")
    training = build_training(traj)
    if not training.replacement:
        raise DomainError("trajectory contains no rewriting events")
    cores = [len(s.core) for s in training.extraction]
    empties = sum(1 for k in cores if k == 0)
    sizes = Counter(k for k in cores if k)
    selected = sum(sizes.values())
    fit = None
    if selected:
        fit = fit_extraction(training.extraction, candidates, criterion, alphabet=training.alphabet)
    return FittedModel(
        extraction=fit,
        creation_prob=empties / len(cores),
        size_dist={k: c / selected for k, c in sorted(sizes.items())},
        table=build_replacement(training.replacement),
        mode=mode,
        initial=training.initial,
        alphabet=training.alphabet,
        events=len(training.replacement),
        skipped=training.skipped,
        training=training,
    )


def reconstruct_and_score(
    fitted: FittedModel,
    reference: Trajectory | TrainingSets,
    steps: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[Trajectory, float]:
    """Simulate the fitted model from the reference's initial configuration and score it.

    The reference side counts the cores of detected events; the simulated side
    counts the cores the fitted extraction drew, whether or not the table
    knew a rewrite for them. Table statistics land on ``fitted.reconstruction``.
    """
    ref = reference if isinstance(reference, TrainingSets) else build_training(reference)
    if steps is None:
        steps = len(reference.events) if isinstance(reference, Trajectory) else len(ref.replacement)
    bound = get_settings().MAX_STEPS
    if steps > bound:
        raise ParameterError(f"steps={steps} exceeds MAX_STEPS={bound}")
    rng = rng if rng is not None else make_rng(0)
    replacement = fitted.replacement_mechanism()
    simulated = run(ref.initial, fitted.extraction_mechanism(), replacement, steps, rng)
    p = key_distribution(ref)
    q = extraction_distribution(simulated)
    if not p and not q:
        distance = 0.0
    elif not p or not q:
        distance = math.inf
    else:
        distance = bhattacharyya(p, q)
    fitted.reconstruction = {
        "steps": len(simulated.events),
        "quiescent": simulated.quiescent,
        "lookups": replacement.lookups,
        "misses": replacement.misses,
        "miss_rate": replacement.misses / replacement.lookups if replacement.lookups else 0.0,
    }
    logger.info(
        "Reconstruction over %d steps: distance %.6f, %d of %d lookups missed",
        steps, distance, replacement.misses, replacement.lookups,
    )
    return simulated, distance
