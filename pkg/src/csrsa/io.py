"""File formats: context JSON, trial/typicality/cost/prediction/trace/report CSVs.

Context files are JSON, either a single context::

    {"id": "fig1", "target": "small_blue",
     "objects": [{"id": "big_blue", "type": "pin", "size": "big", "color": "blue"}, ...],
     "prior": {"big_blue": 0.2, ...}}

or ``{"contexts": [<context>, ...]}``. Objects may carry ``sub``/``basic``/
``super`` labels (all three or none); ``prior`` is optional (uniform).
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .compare import BayesFactor, ComparisonRow
from .engine import PredictionRow, PredictionTable, normalize_minmax
from .generators import LabeledContext
from .inference import Trace, Trial
from .scene import TAXONOMY_SLOTS, ContextError, ReferenceContext, Utterance, make_context, obj
from .semantics import LexiconError, TypicalityTable, load_typicality_table


class FormatError(ValueError):
    """Malformed input file; messages name the file, row and column."""


PathLike = str | Path

TRIAL_COLUMNS = ("context_id", "coded_utterance", "count")
TYPICALITY_COLUMNS = ("utterance", "object", "typicality")
COST_COLUMNS = ("utterance", "neg_log_frequency", "length")
PREDICTION_COLUMNS = ("context_id", "utterance", "probability", "aggregate_class")
REPORT_COLUMNS = ("model", "log_marginal", "se_across_chains")


def _write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write a headed CSV; ``-`` writes to standard output."""
    if str(path) == "-":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path: PathLike, columns: Sequence[str]) -> list[tuple[int, dict[str, str]]]:
    """Rows as (line number, dict); checks the header names ``columns``."""
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from exc
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise FormatError(f"{path}: empty file, expected header {','.join(columns)}")
    header = [h.strip() for h in header]
    missing = [c for c in columns if c not in header]
    if missing:
        raise FormatError(f"{path}: line 1: missing column(s) {missing}; header is {header}")
    out = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise FormatError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
        out.append((line, {h: v.strip() for h, v in zip(header, row)}))
    return out


def _float(path, line, column, raw) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise FormatError(f"{path}: line {line}, column {column!r}: not a number: {raw!r}") from None
    if math.isnan(value):
        raise FormatError(f"{path}: line {line}, column {column!r}: NaN is not allowed")
    return value


# ---------------------------------------------------------------------------
# Contexts


def context_from_dict(d: Mapping, where: str = "context") -> ReferenceContext:
    try:
        objects = []
        for i, o in enumerate(d["objects"]):
            levels = [o.get(s) for s in TAXONOMY_SLOTS]
            if any(levels) and not all(levels):
                raise ContextError(f"object {i}: give all of sub, basic and super or none")
            objects.append(obj(o["id"], o["type"], o.get("size"), o.get("color"),
                               levels if all(levels) else None))
        return make_context(objects, d["target"], d.get("prior"))
    except KeyError as exc:
        raise FormatError(f"{where}: missing field {exc.args[0]!r}") from None
    except (ContextError, TypeError) as exc:
        raise FormatError(f"{where}: {exc}") from None


def context_to_dict(ctx: ReferenceContext, context_id: str | None = None) -> dict:
    objects = []
    for o in ctx.objects:
        f = o.features
        d = {"id": o.id, "type": f.type_name}
        if f.size is not None:
            d["size"] = f.size
        if f.color is not None:
            d["color"] = f.color
        if f.taxonomy is not None:
            d.update(zip(TAXONOMY_SLOTS, f.taxonomy))
        objects.append(d)
    out = {"id": context_id} if context_id is not None else {}
    out.update({"objects": objects, "target": ctx.target.id, "prior": ctx.prior_map})
    return out


def read_contexts(path: PathLike) -> list[LabeledContext]:
    """Labelled contexts from a context JSON file (ids default to positions)."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    items = data.get("contexts", [data]) if isinstance(data, dict) else data
    if not isinstance(items, list) or not items:
        raise FormatError(f"{path}: expected a context object or a non-empty 'contexts' list")
    out, seen = [], set()
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise FormatError(f"{path}: context {i} is not an object")
        cid = str(item.get("id", i))
        if cid in seen:
            raise FormatError(f"{path}: duplicate context id {cid!r}")
        seen.add(cid)
        out.append(LabeledContext(cid, context_from_dict(item, f"{path}: context {cid!r}")))
    return out


def write_contexts(contexts: Sequence[LabeledContext], path: PathLike) -> None:
    payload = {"contexts": [context_to_dict(c.context, c.label) for c in contexts]}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Trials


def _code(u: Utterance | str) -> str:
    return u.key if isinstance(u, Utterance) else u


def write_trials(trials: Sequence[Trial], path: PathLike) -> None:
    """Trial CSV; utterance objects are stored as keys (``size:small|color:blue``)."""
    _write_csv(path, TRIAL_COLUMNS, ((t.context_id, _code(t.coded_utterance), t.count) for t in trials))


def ingest_trials(path: PathLike, contexts: Mapping[str, ReferenceContext] | Sequence[LabeledContext]) -> list[Trial]:
    """Trials from CSV; ``context_id`` must name one of ``contexts``.

    Codes containing ``:`` are parsed into utterances; other codes (surface
    text or classes such as ``size-and-color``) are kept as strings and
    resolved against the alternatives when the likelihood is built.
    """
    lookup = contexts if isinstance(contexts, Mapping) else {c.label: c.context for c in contexts}
    out = []
    for line, row in _read_csv(path, TRIAL_COLUMNS):
        cid = row["context_id"]
        if cid not in lookup:
            raise FormatError(f"{path}: line {line}, column 'context_id': unknown context {cid!r}")
        code = row["coded_utterance"]
        if not code:
            raise FormatError(f"{path}: line {line}, column 'coded_utterance': empty")
        try:
            u = Utterance.parse_key(code) if ":" in code else code
        except ContextError as exc:
            raise FormatError(f"{path}: line {line}, column 'coded_utterance': {exc}") from None
        try:
            count = int(row["count"])
        except ValueError:
            count = 0
        if count < 1 or str(count) != row["count"].lstrip("+"):
            raise FormatError(f"{path}: line {line}, column 'count': need a positive integer, "
                              f"got {row['count']!r}")
        out.append(Trial(lookup[cid], u, count, cid))
    return out


# ---------------------------------------------------------------------------
# Typicality and cost tables


def ingest_typicalities(path: PathLike) -> TypicalityTable:
    """Typicality CSV (single ratings or pre-averaged means); duplicate keys are averaged."""
    rows = []
    for line, row in _read_csv(path, TYPICALITY_COLUMNS):
        v = _float(path, line, "typicality", row["typicality"])
        if not 0.0 <= v <= 1.0:
            raise FormatError(f"{path}: line {line}, column 'typicality': {v} outside [0, 1]")
        if not row["utterance"] or not row["object"]:
            raise FormatError(f"{path}: line {line}: empty utterance or object")
        rows.append((row["utterance"], row["object"], v))
    try:
        return load_typicality_table(rows)
    except LexiconError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_typicalities(table: TypicalityTable, path: PathLike) -> None:
    _write_csv(path, TYPICALITY_COLUMNS, ((u, o, repr(v)) for (u, o), v in table.entries.items()))


def ingest_costs(path: PathLike) -> tuple[dict[str, float], dict[str, float]]:
    """Raw negative log frequencies and lengths, min-max normalised over the file."""
    freq, length = {}, {}
    for line, row in _read_csv(path, COST_COLUMNS):
        u = row["utterance"]
        if not u:
            raise FormatError(f"{path}: line {line}: empty utterance")
        freq[u] = _float(path, line, "neg_log_frequency", row["neg_log_frequency"])
        length[u] = _float(path, line, "length", row["length"])
    if not freq:
        raise FormatError(f"{path}: no rows")
    return normalize_minmax(freq), normalize_minmax(length)


# ---------------------------------------------------------------------------
# Predictions, traces, comparison reports


def write_predictions(table: PredictionTable, path: PathLike) -> None:
    """Prediction CSV with probabilities at 6 decimals."""
    _write_csv(path, PREDICTION_COLUMNS, ((r.context_id, r.utterance, f"{r.probability:.6f}",
                                           r.aggregate_class) for r in table))


def read_predictions(path: PathLike) -> PredictionTable:
    rows = []
    for line, row in _read_csv(path, PREDICTION_COLUMNS):
        p = _float(path, line, "probability", row["probability"])
        if not 0.0 <= p <= 1.0:
            raise FormatError(f"{path}: line {line}, column 'probability': {p} outside [0, 1]")
        rows.append(PredictionRow(row["context_id"], row["utterance"], p, row["aggregate_class"]))
    return PredictionTable(tuple(rows))


def _meta_path(path: PathLike) -> Path:
    return Path(f"{path}.meta.json")


def write_trace(trace: Trace, path: PathLike) -> None:
    """Trace CSV (parameter columns then ``log_post``, exact float reprs) plus a meta sidecar."""
    _write_csv(path, (*trace.names, "log_post"),
               ((*map(repr, map(float, v)), repr(float(lp))) for v, lp in zip(trace.values, trace.log_post)))
    meta = {k: v for k, v in trace.meta.items()}
    _meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_trace(path: PathLike) -> Trace:
    """Trace from CSV (and its sidecar if present); no model is attached."""
    try:
        header = Path(path).read_text(encoding="utf-8-sig").splitlines()[0].split(",")
    except (OSError, IndexError) as exc:
        raise FormatError(f"{path}: cannot read trace header") from exc
    header = [h.strip() for h in header]
    if not header or header[-1] != "log_post":
        raise FormatError(f"{path}: line 1: last column must be 'log_post'")
    names = tuple(header[:-1])
    values, log_post = [], []
    for line, row in _read_csv(path, header):
        values.append([_float(path, line, n, row[n]) for n in names])
        log_post.append(_float(path, line, "log_post", row["log_post"]))
    meta = {}
    if _meta_path(path).exists():
        meta = json.loads(_meta_path(path).read_text(encoding="utf-8"))
    return Trace(names, np.array(values).reshape(len(values), len(names)), np.array(log_post), meta)


def write_report(rows: Sequence[ComparisonRow], path: PathLike) -> None:
    _write_csv(path, REPORT_COLUMNS, ((r.model, repr(r.log_marginal), repr(r.se_across_chains))
                                      for r in rows))


def read_report(path: PathLike) -> list[ComparisonRow]:
    return [ComparisonRow(row["model"], _float(path, line, "log_marginal", row["log_marginal"]),
                          _float(path, line, "se_across_chains", row["se_across_chains"]))
            for line, row in _read_csv(path, REPORT_COLUMNS)]


def write_bayes_factors(matrix: Mapping[tuple[str, str], BayesFactor], path: PathLike) -> None:
    """Square CSV of log10 Bayes factors, row model over column model."""
    models = list(dict.fromkeys(a for a, _ in matrix))
    _write_csv(path, ("model", *models),
               ((a, *(repr(matrix[a, b].log10) for b in models)) for a in models))
