"""Canonical line-oriented text format for configurations and trajectories.

Every line is one JSON array. A snapshot starts with
``["#snapshot", 1, {meta}]`` followed by ``["node", id, state(, attrs)]``
and ``["link", src, dst, label]`` records, nodes sorted by id and links by
(src, dst, label). A trajectory starts with ``["#trajectory", 1, {meta}]``,
embeds the initial snapshot, then one block per step:
``["step", t, {"next_id": n}]`` followed by old-/new- node, seed and link
records and ``["map", old, new]`` correspondence records. Equal structures
serialize to equal bytes.
"""

import json
from dataclasses import dataclass, field

from app.core.errors import SchemaError, StaleEventError, TraceCorruptionError
from app.core.gna import GnaConfig, RewriteEvent, SubGna, Trajectory, embed

VERSION = 1
SNAPSHOT = "#snapshot"
TRAJECTORY = "#trajectory"


@dataclass
class Snapshot:
    """Format-level graph record, also used for simulator states."""

    directed: bool = True
    time: int = 0
    nodes: list[tuple] = field(default_factory=list)
    links: list[tuple] = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def _line(record: list) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def snapshot_lines(snap: Snapshot) -> list[str]:
    meta = {**snap.meta, "directed": snap.directed, "time": snap.time}
    lines = [_line([SNAPSHOT, VERSION, meta])]
    for node in sorted(snap.nodes, key=lambda n: n[0]):
        node_id, state, *rest = node
        attrs = rest[0] if rest else None
        lines.append(_line(["node", node_id, state] + ([attrs] if attrs else [])))
    for src, dst, label in sorted(snap.links, key=lambda l: (l[0], l[1], str(l[2]))):
        lines.append(_line(["link", src, dst, label]))
    return lines


def config_to_snapshot(config: GnaConfig) -> Snapshot:
    meta = {"next_id": config.next_id}
    if config.alphabet is not None:
        meta["alphabet"] = sorted(config.alphabet)
    return Snapshot(
        directed=config.directed,
        time=config.time,
        nodes=[(v, s) for v, s in config.states.items()],
        links=[(u, d, s) for u, out in config.links.items() for d, s in out],
        meta=meta,
    )


def _sub_lines(prefix: str, sub: SubGna) -> list[str]:
    lines = [_line([f"{prefix}-node", v, s]) for v, s in sorted(sub.states.items())]
    lines.extend(_line([f"{prefix}-seed", v]) for v in sub.seeds)
    lines.extend(_line([f"{prefix}-link", u, d, s]) for u, d, s in sub.link_triples())
    return lines


def serialize(obj: GnaConfig | Trajectory | Snapshot) -> str:
    if isinstance(obj, Snapshot):
        lines = snapshot_lines(obj)
    elif isinstance(obj, GnaConfig):
        lines = snapshot_lines(config_to_snapshot(obj))
    elif isinstance(obj, Trajectory):
        meta = {"directed": obj.initial.directed, "quiescent": obj.quiescent, "steps": len(obj.events)}
        lines = [_line([TRAJECTORY, VERSION, meta])]
        lines.extend(snapshot_lines(config_to_snapshot(obj.initial)))
        time = obj.initial.time
        for event in obj.events:
            lines.append(_line(["step", time, {"next_id": event.old.next_id}]))
            lines.extend(_sub_lines("old", event.old))
            lines.extend(_sub_lines("new", event.new))
            lines.extend(_line(["map", o, n]) for o, n in sorted(event.correspondence.items()))
            time += 1
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    return "\n".join(lines) + "\n"


def _records(text: str):
    for number, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaError(exc.msg, line=number, column=exc.colno) from exc
        if not isinstance(record, list) or not record or not isinstance(record[0], str):
            raise SchemaError("record must be a JSON array starting with a tag", line=number, column=1)
        yield number, record


def _expect(record: list, sizes: tuple[int, ...], number: int) -> None:
    if len(record) not in sizes:
        raise SchemaError(f"{record[0]} record takes {' or '.join(map(str, sizes))} fields", line=number, column=1)


def _header(number: int, record: list, tag: str) -> dict:
    if record[0] != tag:
        raise SchemaError(f"expected {tag} header, found {record[0]!r}", line=number, column=1)
    _expect(record, (3,), number)
    if record[1] != VERSION:
        raise SchemaError(f"unsupported format version {record[1]}", line=number, column=1)
    if not isinstance(record[2], dict):
        raise SchemaError("header metadata must be an object", line=number, column=1)
    return record[2]


def _read_snapshot(records: list[tuple[int, list]]) -> Snapshot:
    if not records:
        raise SchemaError("missing snapshot header", line=1, column=1)
    number, record = records[0]
    meta = dict(_header(number, record, SNAPSHOT))
    snap = Snapshot(directed=bool(meta.pop("directed", True)), time=int(meta.pop("time", 0)), meta=meta)
    seen = set()
    for number, record in records[1:]:
        if record[0] == "node":
            _expect(record, (3, 4), number)
            if record[1] in seen:
                raise SchemaError(f"duplicate node id {record[1]}", line=number, column=1)
            seen.add(record[1])
            snap.nodes.append(tuple(record[1:]))
        elif record[0] == "link":
            _expect(record, (4,), number)
            for endpoint in record[1:3]:
                if endpoint not in seen:
                    raise SchemaError(f"link references unknown node {endpoint}", line=number, column=1)
            snap.links.append(tuple(record[1:]))
        else:
            raise SchemaError(f"unexpected record {record[0]!r} in snapshot", line=number, column=1)
    return snap


def snapshot_to_config(snap: Snapshot) -> GnaConfig:
    states = {}
    for node in snap.nodes:
        if not isinstance(node[0], int) or not isinstance(node[1], str):
            raise SchemaError(f"configuration nodes need integer ids and string states, got {node[:2]}")
        states[node[0]] = node[1]
    links: dict[int, list] = {v: [] for v in states}
    for src, dst, label in snap.links:
        links[src].append((dst, str(label)))
    return GnaConfig(
        states=states,
        links=links,
        time=snap.time,
        directed=snap.directed,
        next_id=snap.meta.get("next_id"),
        alphabet=snap.meta.get("alphabet"),
    )


def parse_snapshot(text: str) -> Snapshot:
    return _read_snapshot(list(_records(text)))


def _read_event(number: int, meta: dict, block: list[tuple[int, list]], directed: bool) -> RewriteEvent:
    next_id = int(meta.get("next_id", 0))
    subs = {p: SubGna(directed=directed, next_id=next_id) for p in ("old", "new")}
    seeds = {"old": [], "new": []}
    correspondence = {}
    for line, record in block:
        tag = record[0]
        prefix, _, kind = tag.partition("-")
        if tag == "map":
            _expect(record, (3,), line)
            correspondence[record[1]] = record[2]
        elif prefix in subs and kind == "node":
            _expect(record, (3,), line)
            subs[prefix].states[record[1]] = record[2]
            subs[prefix].links[record[1]] = []
        elif prefix in subs and kind == "seed":
            _expect(record, (2,), line)
            seeds[prefix].append(record[1])
        elif prefix in subs and kind == "link":
            _expect(record, (4,), line)
            if record[1] not in subs[prefix].states:
                raise SchemaError(f"link references unknown node {record[1]}", line=line, column=1)
            subs[prefix].links[record[1]].append((record[2], record[3]))
        else:
            raise SchemaError(f"unexpected record {tag!r} in step", line=line, column=1)
    for prefix, sub in subs.items():
        sub.seeds = tuple(seeds[prefix])
    try:
        return RewriteEvent(old=subs["old"], new=subs["new"], correspondence=correspondence)
    except SchemaError as exc:
        raise SchemaError(str(exc), line=number, column=1) from exc


def parse(text: str) -> GnaConfig | Trajectory:
    """Parse either a snapshot or a trajectory; trajectories are replayed and checked."""
    records = list(_records(text))
    if not records:
        raise SchemaError("empty document", line=1, column=1)
    number, first = records[0]
    if first[0] == SNAPSHOT:
        return snapshot_to_config(_read_snapshot(records))
    meta = _header(number, first, TRAJECTORY)
    start = next((i for i, (_, r) in enumerate(records) if r[0] == "step"), len(records))
    initial = snapshot_to_config(_read_snapshot(records[1:start]))
    current = initial.copy()
    events = []
    i = start
    while i < len(records):
        number, record = records[i]
        _expect(record, (3,), number)
        if not isinstance(record[2], dict):
            raise SchemaError("step metadata must be an object", line=number, column=1)
        if record[1] != current.time:
            raise TraceCorruptionError(f"line {number}: step at t={record[1]} but replay is at t={current.time}")
        j = i + 1
        while j < len(records) and records[j][1][0] != "step":
            j += 1
        event = _read_event(number, record[2], records[i + 1 : j], initial.directed)
        try:
            embed(current, event, inplace=True)
        except StaleEventError as exc:
            raise TraceCorruptionError(f"line {number}: {exc}") from exc
        events.append(event)
        i = j
    if meta.get("steps", len(events)) != len(events):
        raise SchemaError(f"header declares {meta['steps']} steps, found {len(events)}", line=1, column=1)
    return Trajectory(initial=initial, events=events, quiescent=bool(meta.get("quiescent", False)), final=current)


def serialize_series(snapshots) -> str:
    return "".join(serialize(s) for s in snapshots)


def parse_series(text: str) -> list[Snapshot]:
    """Split a concatenation of snapshots at their headers."""
    groups: list[list[tuple[int, list]]] = []
    for number, record in _records(text):
        if record[0] == SNAPSHOT:
            groups.append([])
        elif not groups:
            raise SchemaError("series must start with a snapshot header", line=number, column=1)
        groups[-1].append((number, record))
    return [_read_snapshot(g) for g in groups]
