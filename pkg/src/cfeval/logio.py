"""JSON Lines exploration logs.

One record per line::

    {"schema":1,"ctx":{"id":...,"features":[...]},"seed":...,"action":...,"p":...,"pvec":[...],"r":...}

``seed`` and ``pvec`` are optional, ``p`` is mandatory and must be > 0.
Atomic actions are integers, subset actions sorted candidate lists.
"""

from __future__ import annotations

import json
import math
from typing import IO, Iterator

import numpy as np

from .collector import ExplorationLog, ExplorationRecord, PropensityVector
from .core import Action, Context
from .errors import DataIntegrityError, LogFormatError

LOG_SCHEMA = 1
_SEP = (",", ":")


def record_to_dict(rec: ExplorationRecord) -> dict:
    doc = {
        "schema": LOG_SCHEMA,
        "ctx": {"id": rec.context.id, "features": list(rec.context.features)},
    }
    if rec.seed is not None:
        doc["seed"] = rec.seed
    doc["action"] = rec.action.to_json()
    doc["p"] = rec.propensity
    if rec.propensity_vector is not None:
        doc["pvec"] = rec.propensity_vector.tolist()
    doc["r"] = rec.reward
    return doc


def write_log(log: ExplorationLog, fp: IO[str]) -> int:
    """Write ``log`` as JSON Lines; returns the number of records written."""
    ctx_docs = [{"id": c.id, "features": list(c.features)} for c in log.contexts]
    table = None if log.pvec_table is None else log.pvec_table.tolist()
    subset = log.mode == "subset"
    for i in range(len(log)):
        doc = {"schema": LOG_SCHEMA, "ctx": ctx_docs[log.ctx[i]]}
        if log.seed is not None:
            doc["seed"] = int(log.seed[i])
        a = int(log.action[i])
        doc["action"] = Action.from_subset_index(a).to_json() if subset else a
        doc["p"] = float(log.propensity[i])
        if table is not None:
            doc["pvec"] = table[log.pvec_row[i]]
        doc["r"] = float(log.reward[i])
        fp.write(json.dumps(doc, separators=_SEP))
        fp.write("\n")
    return len(log)


def _load_doc(line: str, lineno: int | None) -> dict:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise LogFormatError(f"invalid JSON ({exc.msg})", lineno) from None
    if not isinstance(doc, dict):
        raise LogFormatError("record is not an object", lineno)
    schema = doc.get("schema")
    if schema != LOG_SCHEMA:
        raise LogFormatError(f"unknown schema version {schema!r}", lineno)
    for key in ("ctx", "action", "p", "r"):
        if key not in doc:
            raise LogFormatError(f"missing field {key!r}", lineno)
    p = doc["p"]
    if not isinstance(p, (int, float)) or isinstance(p, bool) or not math.isfinite(p):
        raise LogFormatError(f"bad propensity {p!r}", lineno)
    if p <= 0:
        raise DataIntegrityError(f"line {lineno}: propensity {p!r} is not > 0")
    return doc


def parse_record(line: str, lineno: int | None = None) -> ExplorationRecord:
    doc = _load_doc(line, lineno)
    try:
        ctx = Context(doc["ctx"]["id"], tuple(doc["ctx"]["features"]))
        action = Action.from_json(doc["action"])
        pv = None
        if doc.get("pvec") is not None:
            pv = PropensityVector(doc["pvec"], "subset" if action.is_subset else "atomic")
        return ExplorationRecord(ctx, action, float(doc["p"]), float(doc["r"]), doc.get("seed"), pv)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataIntegrityError):
            raise
        raise LogFormatError(f"malformed field: {exc}", lineno) from None


def iter_records(fp: IO[str]) -> Iterator[ExplorationRecord]:
    for lineno, line in enumerate(fp, start=1):
        if line.strip():
            yield parse_record(line, lineno)


class _ChunkBuilder:
    """Accumulates parsed lines into columns, validating each distinct
    context and propensity vector once."""

    def __init__(self):
        self.ctx_ids: dict[tuple, int] = {}
        self.contexts: list[Context] = []
        self.pvec_ids: dict[tuple, int] = {}
        self.cols = {k: [] for k in ("ctx", "action", "p", "r", "seed", "pvec_row")}
        self.mode = None
        self.with_seed = True
        self.with_pvec = True

    def __len__(self):
        return len(self.cols["ctx"])

    def add(self, doc: dict, lineno: int) -> None:
        try:
            c = doc["ctx"]
            key = (c["id"], tuple(c["features"]))
            if key not in self.ctx_ids:
                self.ctx_ids[key] = len(self.contexts)
                self.contexts.append(Context(*key))
            a = doc["action"]
            subset = isinstance(a, list)
            if self.mode is None:
                self.mode = "subset" if subset else "atomic"
            elif subset != (self.mode == "subset"):
                raise LogFormatError("log mixes atomic and subset actions", lineno)
            a_idx = Action.from_json(a).index
            r = float(doc["r"])
            if not 0.0 <= r <= 1.0:
                raise LogFormatError(f"reward {r!r} outside [0, 1]", lineno)
            seed = doc.get("seed")
            if seed is None:
                self.with_seed = False
            elif not isinstance(seed, int) or not 0 <= seed < 1 << 64:
                raise LogFormatError(f"bad seed {seed!r}", lineno)
            pvec = doc.get("pvec")
            row = -1
            if pvec is None:
                self.with_pvec = False
            else:
                pkey = tuple(pvec)
                row = self.pvec_ids.get(pkey)
                if row is None:
                    PropensityVector(pkey, self.mode)
                    row = self.pvec_ids[pkey] = len(self.pvec_ids)
        except LogFormatError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise LogFormatError(f"malformed field: {exc}", lineno) from None
        cols = self.cols
        cols["ctx"].append(self.ctx_ids[key])
        cols["action"].append(a_idx)
        cols["p"].append(float(doc["p"]))
        cols["r"].append(r)
        cols["seed"].append(seed or 0)
        cols["pvec_row"].append(row)

    def build(self) -> ExplorationLog:
        cols = self.cols
        table = None
        if self.with_pvec:
            if len({len(k) for k in self.pvec_ids}) != 1:
                raise LogFormatError("propensity vectors differ in length")
            table = np.array(list(self.pvec_ids), dtype=np.float64)
        return ExplorationLog(
            self.contexts,
            np.array(cols["ctx"], dtype=np.int64),
            np.array(cols["action"], dtype=np.int64),
            np.array(cols["p"], dtype=np.float64),
            np.array(cols["r"], dtype=np.float64),
            mode=self.mode,
            seed=np.array(cols["seed"], dtype=np.uint64) if self.with_seed else None,
            pvec_table=table,
            pvec_row=np.array(cols["pvec_row"], dtype=np.int64) if self.with_pvec else None,
        )


def iter_log_chunks(fp: IO[str], chunk_size: int = 1 << 16) -> Iterator[ExplorationLog]:
    """Stream a JSON Lines log as column chunks of at most ``chunk_size`` records."""
    buf = _ChunkBuilder()
    for lineno, line in enumerate(fp, start=1):
        if not line.strip():
            continue
        buf.add(_load_doc(line, lineno), lineno)
        if len(buf) >= chunk_size:
            yield buf.build()
            buf = _ChunkBuilder()
    if len(buf):
        yield buf.build()


def read_log(fp: IO[str]) -> ExplorationLog:
    chunks = list(iter_log_chunks(fp))
    if not chunks:
        raise LogFormatError("log is empty")
    return ExplorationLog.concat(chunks)


def save_log(log: ExplorationLog, path) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        write_log(log, fp)


def load_log(path) -> ExplorationLog:
    with open(path, encoding="utf-8") as fp:
        return read_log(fp)
