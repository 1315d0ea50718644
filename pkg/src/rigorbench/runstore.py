"""Append-only run store: one JSON line per recorded run.

Every command that produces artifacts can append a run record. Writers
serialize through a lock file so concurrent appends from separate processes
never interleave. Each record carries a digest over its own payload;
reading verifies digests and quarantines what does not check out instead
of taking the whole store down with it.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from filelock import FileLock

from .errors import DigestMismatch, StoreIO

RUN_SCHEMA = "rigorbench_run_v1"


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    timestamp: str
    command: str
    config: dict
    artifacts: dict
    digest: str

    def to_json_obj(self) -> dict:
        return {
            "schema": RUN_SCHEMA,
            "run_id": self.run_id,
            "timestamp": self.timestamp,
            "command": self.command,
            "config": self.config,
            "artifacts": self.artifacts,
            "digest": self.digest,
        }


def _payload_digest(obj: dict) -> str:
    payload = {k: v for k, v in obj.items() if k != "digest"}
    return hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()


def new_run_record(
    command: str,
    config: dict,
    artifacts: dict,
    run_id: str | None = None,
    timestamp: str | None = None,
) -> RunRecord:
    """Build a record; id and timestamp are derivable but overridable.

    The default id is a short hash of (timestamp, command, config), which is
    unique enough for a per-project store and keeps records self-contained.
    """
    ts = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    if run_id is None:
        seed_material = _canonical({"t": ts, "c": command, "cfg": config})
        run_id = hashlib.sha256(seed_material.encode("utf-8")).hexdigest()[:12]
    obj = {
        "schema": RUN_SCHEMA,
        "run_id": run_id,
        "timestamp": ts,
        "command": command,
        "config": config,
        "artifacts": artifacts,
    }
    return RunRecord(
        run_id=run_id,
        timestamp=ts,
        command=command,
        config=config,
        artifacts=artifacts,
        digest=_payload_digest(obj),
    )


def record_from_json_obj(obj) -> RunRecord:
    if not isinstance(obj, dict) or obj.get("schema") != RUN_SCHEMA:
        raise StoreIO(f"run record must declare schema {RUN_SCHEMA}")
    try:
        record = RunRecord(
            run_id=str(obj["run_id"]),
            timestamp=str(obj["timestamp"]),
            command=str(obj["command"]),
            config=dict(obj["config"]),
            artifacts=dict(obj["artifacts"]),
            digest=str(obj["digest"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StoreIO(f"bad run record: {exc}") from exc
    expected = _payload_digest(record.to_json_obj())
    if record.digest != expected:
        raise DigestMismatch(
            f"run {record.run_id}: digest {record.digest[:12]}... does not match payload"
        )
    return record


def append_run(store_path: str | Path, record: RunRecord) -> None:
    """Append one record under the store's writer lock."""
    store_path = Path(store_path)
    store_path.parent.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(store_path) + ".lock")
    line = _canonical(record.to_json_obj()) + "\n"
    try:
        with lock:
            with open(store_path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
    except OSError as exc:
        raise StoreIO(f"cannot append to {store_path}: {exc}") from exc


@dataclass(frozen=True)
class QuarantinedLine:
    line_number: int
    reason: str
    text: str


@dataclass(frozen=True)
class RunStoreContents:
    records: tuple[RunRecord, ...]
    quarantined: tuple[QuarantinedLine, ...]


def read_runs(store_path: str | Path, strict: bool = False) -> RunStoreContents:
    """Read all records, verifying digests.

    A torn final line (interrupted writer) is quarantined, never fatal.
    Unparseable JSON before the final line means the file was edited or
    corrupted, which strict mode treats as an error; by default it is
    quarantined too so the surviving records stay reachable. Digest
    mismatches follow the same policy.
    """
    store_path = Path(store_path)
    if not store_path.exists():
        return RunStoreContents(records=(), quarantined=())
    try:
        raw = store_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StoreIO(f"cannot read {store_path}: {exc}") from exc
    lines = raw.split("\n")
    # a well-formed store ends with a newline, so the last element is empty
    torn_final = lines and lines[-1] != ""
    records: list[RunRecord] = []
    quarantined: list[QuarantinedLine] = []
    for lineno, line in enumerate(lines, start=1):
        if line == "":
            continue
        is_final = lineno == len(lines)
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            if is_final and torn_final:
                quarantined.append(QuarantinedLine(lineno, "torn_final_line", line))
                continue
            if strict:
                raise StoreIO(f"{store_path}:{lineno}: unparseable record")
            quarantined.append(QuarantinedLine(lineno, "unparseable", line))
            continue
        try:
            records.append(record_from_json_obj(obj))
        except DigestMismatch:
            if strict:
                raise
            quarantined.append(QuarantinedLine(lineno, "digest_mismatch", line))
        except StoreIO:
            if strict:
                raise
            quarantined.append(QuarantinedLine(lineno, "bad_schema", line))
    return RunStoreContents(records=tuple(records), quarantined=tuple(quarantined))


def latest_run(store_path: str | Path, command: str | None = None) -> RunRecord | None:
    contents = read_runs(store_path)
    for record in reversed(contents.records):
        if command is None or record.command == command:
            return record
    return None
