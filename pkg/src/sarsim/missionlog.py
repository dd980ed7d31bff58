"""Append-only mission log (JSONL) plus the CSV exports used for plotting.

Every record is a flat JSON object with ``t``, ``uav`` and ``kind`` first and
kind-specific fields after. Serialization is deterministic: fixed key order,
compact separators and Python's shortest round-trip float repr, so equal runs
give equal bytes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

KINDS = (
    "state_transition",
    "detection",
    "setpoint",
    "gripper",
    "comms_tx",
    "comms_rx",
    "violation",
    "metric",
)

WORLD_ID = 0  # uav field for records that belong to no single UAV


class LogParseError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


def dumps(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"), allow_nan=False)


class MissionLog:
    """In-memory record list that can be flushed as JSONL."""

    def __init__(self):
        self.records: list[dict] = []
        self._last_t: dict[int, float] = {}

    def append(self, t: float, uav: int, kind: str, **payload) -> dict:
        if kind not in KINDS:
            raise ValueError(f"unknown record kind {kind!r}")
        if t < self._last_t.get(uav, -1.0):
            raise ValueError(f"record for uav {uav} goes back in time ({t})")
        self._last_t[uav] = t
        rec = {"t": t, "uav": uav, "kind": kind}
        rec.update(payload)
        self.records.append(rec)
        return rec

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[dict]:
        return iter(self.records)

    def of_kind(self, kind: str) -> list[dict]:
        return [r for r in self.records if r["kind"] == kind]

    def to_jsonl(self) -> str:
        return "".join(dumps(r) + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())


def _check_record(rec, path, lineno: int) -> dict:
    if not isinstance(rec, dict):
        raise LogParseError(path, lineno, "record is not a JSON object")
    for key, typ in (("t", (int, float)), ("uav", int), ("kind", str)):
        if key not in rec:
            raise LogParseError(path, lineno, f"missing field {key!r}")
        if not isinstance(rec[key], typ) or isinstance(rec[key], bool):
            raise LogParseError(path, lineno, f"field {key!r} has the wrong type")
    if rec["kind"] not in KINDS:
        raise LogParseError(path, lineno, f"unknown kind {rec['kind']!r}")
    return rec


def parse_jsonl(lines: Iterable[str], path="<log>") -> list[dict]:
    out = []
    last_t: dict[int, float] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogParseError(path, lineno, f"invalid JSON ({exc.msg})") from None
        rec = _check_record(rec, path, lineno)
        if rec["t"] < last_t.get(rec["uav"], -1.0):
            raise LogParseError(path, lineno, "timestamp goes backwards for this UAV")
        last_t[rec["uav"]] = rec["t"]
        out.append(rec)
    return out


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return parse_jsonl(fh, path)


# --------------------------------------------------------------------------
# Views used by replay


@dataclass(frozen=True)
class TimelineEntry:
    t: float
    uav: int
    text: str


def timeline(records: Iterable[dict]) -> list[TimelineEntry]:
    """State changes, gripper edges and violations, in log order."""
    out = []
    for r in records:
        k = r["kind"]
        if k == "state_transition":
            out.append(TimelineEntry(r["t"], r["uav"], f"{r['old']} -> {r['new']} on {r['event']}"))
        elif k == "gripper" and r.get("edge"):
            out.append(TimelineEntry(r["t"], r["uav"], f"gripper {r['action']} feedback {r['edge']}"))
        elif k == "violation":
            out.append(TimelineEntry(r["t"], r["uav"], f"VIOLATION {r['rule']} {r.get('uavs', '')}"))
    return out


def final_states(records: Iterable[dict]) -> dict[int, str]:
    states: dict[int, str] = {}
    for r in records:
        if r["kind"] == "state_transition":
            states[r["uav"]] = r["new"]
    return dict(sorted(states.items()))


def telemetry(records: Iterable[dict]) -> list[dict]:
    return [r for r in records if r["kind"] == "setpoint"]


ALTITUDE_COLUMNS = ("t", "uav", "mode", "altitude")
DISTANCE_COLUMNS = ("t", "uav", "mode", "distance")


def _csv_text(rows: Iterable[dict], columns: tuple[str, ...]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def altitude_csv(records: Iterable[dict]) -> str:
    return _csv_text(telemetry(records), ALTITUDE_COLUMNS)


def distance_csv(records: Iterable[dict]) -> str:
    return _csv_text(telemetry(records), DISTANCE_COLUMNS)


EVENT_COLUMNS = ("t", "uav", "kind", "payload")


def events_csv(records: Iterable[dict]) -> str:
    """Every record as (t, uav, kind, payload JSON) rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_COLUMNS)
    for r in records:
        payload = {k: v for k, v in r.items() if k not in ("t", "uav", "kind")}
        w.writerow([repr(float(r["t"])), r["uav"], r["kind"], dumps(payload)])
    return buf.getvalue()


def parse_events_csv(text: str, path="<csv>") -> list[dict]:
    """Inverse of :func:`events_csv`."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != EVENT_COLUMNS:
        raise LogParseError(path, 1, f"expected header {','.join(EVENT_COLUMNS)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 4:
            raise LogParseError(path, lineno, "expected 4 columns")
        try:
            rec = {"t": float(row[0]), "uav": int(row[1]), "kind": row[2]}
            rec.update(json.loads(row[3]))
        except ValueError as exc:
            raise LogParseError(path, lineno, str(exc)) from None
        out.append(_check_record(rec, path, lineno))
    return out


def read_table_csv(text: str) -> list[dict]:
    """Parse an altitude or distance export back into typed rows."""
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        row = {"t": float(r["t"]), "uav": int(r["uav"]), "mode": r["mode"]}
        for key in ("altitude", "distance"):
            if key in r:
                row[key] = float(r[key])
        rows.append(row)
    return rows
