"""Experiment runners shared by the command line and the job API.

Each runner validates its inputs, writes artifacts atomically under the
output directory and always finishes with ``manifest.json``, failed runs
included. Outputs carry no timestamps, so the same manifest reproduces the
same bytes.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import pandas as pd

from app import __version__
from app.core.canonical import digest
from app.core.config import get_settings
from app.core.errors import ConfigError, DomainError, ParameterError, WorkbenchError
from app.core.files import atomic_write, load_model, read_document, validate
from app.core.rng import make_rng, rng_info
from app.models.schemas import ExperimentConfig, MergerSweep, ModelSpec, Scenario

logger = logging.getLogger("workbench.experiments")

KINDS = ("simulate", "discover", "opnet", "merger", "analyze")


@dataclass
class ExperimentResult:
    kind: str
    out_dir: Path
    artifacts: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator="\n")


def _json(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _require_seed(cfg: ExperimentConfig) -> int:
    if cfg.seed is None:
        raise ConfigError(f"{cfg.kind}: an explicit seed is required for stochastic runs")
    return cfg.seed


def manifest(cfg: ExperimentConfig, artifacts: list[str], summary: dict) -> dict:
    config = cfg.model_dump(mode="json", exclude={"out"})
    return {
        "kind": cfg.kind,
        "config": config,
        "config_sha256": digest(config),
        "seed": cfg.seed,
        "version": __version__,
        "rng": rng_info(),
        "artifacts": sorted(artifacts),
        "summary": summary,
    }


class _Writer:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.written: list[str] = []

    def __call__(self, name: str, content: str) -> None:
        atomic_write(self.out_dir / name, content)
        self.written.append(name)


# --- runners --------------------------------------------------------------


def _simulate(cfg: ExperimentConfig, write: _Writer) -> dict:
    from app.core.gna import run
    from app.core.snapshot import serialize
    from app.core.zoo import build_model

    if not cfg.model:
        raise ConfigError("simulate: a model name is required")
    seed = _require_seed(cfg)
    rng = make_rng(seed)
    model, default_steps = build_model(ModelSpec(model=cfg.model, params=cfg.params), rng)
    steps = default_steps if cfg.steps is None else cfg.steps
    bound = get_settings().MAX_STEPS
    if steps > bound:
        raise ParameterError(f"steps={steps} exceeds MAX_STEPS={bound}")
    traj = run(model.initial, model.extraction, model.replacement, steps, rng)
    final = traj.last()
    if cfg.format == "csv":
        rows = [
            {"time": c.time, "nodes": len(c), "links": c.link_count()}
            for c in traj.configs()
        ]
        write("summary.csv", _csv(pd.DataFrame(rows, columns=["time", "nodes", "links"])))
    else:
        write("trajectory.gna", serialize(traj))
        write("final.gna", serialize(final))
    return {
        "model": cfg.model,
        "steps": len(traj.events),
        "quiescent": traj.quiescent,
        "nodes": len(final),
        "links": final.link_count(),
    }


def _load_trajectory(cfg: ExperimentConfig):
    from app.core.discovery import read_graphml_trace
    from app.core.gna import Trajectory
    from app.core.snapshot import parse

    if cfg.graphml:
        return read_graphml_trace(cfg.graphml)
    if not cfg.trace:
        raise ConfigError("discover: a trace file or GraphML snapshots are required")
    try:
        text = Path(cfg.trace).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read trace {cfg.trace}: {exc.strerror}") from exc
    traj = parse(text)
    if not isinstance(traj, Trajectory):
        raise ConfigError(f"{cfg.trace} holds a single snapshot, not a trajectory")
    return traj


def _discover(cfg: ExperimentConfig, write: _Writer) -> dict:
    from app.core.discovery import discover, reconstruct_and_score

    traj = _load_trajectory(cfg)
    fitted = discover(traj, candidates=cfg.candidates, mode=cfg.mode)
    distance = None
    if cfg.seed is not None:
        _, distance = reconstruct_and_score(fitted, fitted.training, steps=cfg.steps, rng=make_rng(cfg.seed))
    report = fitted.report(distance)
    write("report.json", _json(report))
    write("report.txt", fitted.report_text(distance))
    return {
        "events": fitted.events,
        "family": fitted.extraction.winner.family if fitted.extraction else None,
        "classes": len(fitted.table),
        "distance": report["distance"],
    }


def _opnet(cfg: ExperimentConfig, write: _Writer) -> dict:
    from app.core import opnet
    from app.core.snapshot import serialize_series

    if not cfg.scenario:
        raise ConfigError("opnet: a scenario file is required")
    seed = _require_seed(cfg)
    scenario = load_model(cfg.scenario, Scenario)
    st = opnet.build_state(scenario)
    rows = [opnet.tick_metrics(st)]
    series = [opnet.state_snapshot(st)]

    def record(state):
        rows.append(opnet.tick_metrics(state))
        series.append(opnet.state_snapshot(state))

    st, ticks, truncated = opnet.run_to_quiescence(st, make_rng(seed), cfg.max_ticks, on_tick=record)
    write("metrics.csv", _csv(pd.DataFrame(rows)))
    write("influence.csv", _csv(pd.DataFrame(
        opnet.influence_table(st),
        columns=list(opnet.INFLUENCE_COLUMNS),
    )))
    if cfg.format == "snapshot":
        write("series.gna", serialize_series(series))
    return {"scenario": scenario.name, "ticks": ticks, "truncated": truncated, **rows[-1]}


def _merger(cfg: ExperimentConfig, write: _Writer) -> dict:
    from app.core.merger import run_sweep

    seed = _require_seed(cfg)
    sweep = cfg.sweep or MergerSweep()
    if cfg.iterations is not None:
        sweep = sweep.model_copy(update={"iterations": cfg.iterations})
    workers = max(1, get_settings().WORKERS)
    frame, snapshots = run_sweep(sweep, seed, workers)
    write("metrics.csv", _csv(frame))
    for label, text in sorted(snapshots.items()):
        write(f"snapshots/{label}.gna", text)
    final = frame[frame["iteration"] == sweep.iterations]
    means = final.groupby("condition")["cross_distance"].mean()
    return {"conditions": int(means.size), "runs": sweep.runs, "final_cross_distance": {
        k: float(v) for k, v in sorted(means.items())
    }}


def _analyze_one(path: str) -> tuple[dict, dict | None]:
    from app.core import graph as measures
    from app.core.merger import metrics, state_from_snapshot
    from app.core.snapshot import parse_snapshot

    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read snapshot {path}: {exc.strerror}") from exc
    snap = parse_snapshot(text)
    g = nx.MultiDiGraph() if snap.directed else nx.MultiGraph()
    g.add_nodes_from(node[0] for node in snap.nodes)
    g.add_edges_from((u, v) for u, v, _ in snap.links)
    row = {"input": path, "nodes": g.number_of_nodes(), "links": g.number_of_edges()}
    if g.number_of_nodes():
        comps = measures.weakly_connected_components(g)
        hist = measures.degree_histogram(g)
        row.update(
            components=len(comps),
            largest_component=len(comps[0]),
            max_degree=max(hist),
            mean_degree=sum(d * c for d, c in hist.items()) / g.number_of_nodes(),
        )
        try:
            row["powerlaw_gamma"] = measures.powerlaw_exponent_mle(d for _, d in g.degree())
        except DomainError:
            row["powerlaw_gamma"] = math.nan
    merger_row = None
    if "firm_size" in snap.meta:
        merger_row = {"input": path, **metrics(state_from_snapshot(snap))}
    return row, merger_row


def _analyze(cfg: ExperimentConfig, write: _Writer) -> dict:
    if not cfg.inputs:
        raise ConfigError("analyze: at least one snapshot input is required")
    rows, merger_rows = [], []
    for path in cfg.inputs:
        row, merger_row = _analyze_one(path)
        rows.append(row)
        if merger_row is not None:
            merger_rows.append(merger_row)
    write("analysis.csv", _csv(pd.DataFrame(rows)))
    if merger_rows:
        write("merger_metrics.csv", _csv(pd.DataFrame(merger_rows)))
    return {"inputs": len(rows), "merger_snapshots": len(merger_rows)}


RUNNERS = {
    "simulate": _simulate,
    "discover": _discover,
    "opnet": _opnet,
    "merger": _merger,
    "analyze": _analyze,
}


def load_experiment(path: str | None, kind: str, overrides: dict | None = None) -> ExperimentConfig:
    """Merge a config file with explicit overrides and validate it for ``kind``."""
    if kind not in KINDS:
        raise ConfigError(f"Invalid experiment kind: {kind}. Must be one of {list(KINDS)}")
    data = read_document(path) if path else {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    data = dict(data)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            value = {**data[key], **value}
        data[key] = value
    data["kind"] = kind
    return validate(ExperimentConfig, data, source=path or kind)


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> ExperimentResult:
    """Run ``cfg`` and write its manifest.

    A failed run still leaves ``manifest.json`` behind, listing whatever was
    written and an ``error`` entry; the original error is re-raised.
    """
    out = Path(out_dir or cfg.out or Path(get_settings().OUTPUT_DIR) / cfg.kind)
    write = _Writer(out)
    logger.info("Running %s into %s (seed=%s)", cfg.kind, out, cfg.seed)
    try:
        summary = RUNNERS[cfg.kind](cfg, write)
    except Exception as exc:
        failed = manifest(cfg, write.written, {})
        failed["error"] = {
            "type": type(exc).__name__,
            "message": str(exc),
            "exit_code": getattr(exc, "exit_code", 1),
        }
        try:
            atomic_write(out / "manifest.json", _json(failed))
        except WorkbenchError as write_error:
            logger.error("Could not record the failed %s run: %s", cfg.kind, write_error)
        raise
    write("manifest.json", _json(manifest(cfg, write.written, summary)))
    return ExperimentResult(kind=cfg.kind, out_dir=out, artifacts=list(write.written), summary=summary)
