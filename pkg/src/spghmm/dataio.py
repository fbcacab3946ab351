"""Dataset ingestion, year-block structuring, model persistence and CSV/JSON outputs.

File formats
------------
``data.csv``       ``date,location_id,precip_mm`` (ISO dates, one row per cell)
``locations.csv``  ``location_id,lat,lon``
wide CSV           ``date,<location_id>,<location_id>,...``
model JSON         see ``MODEL_SCHEMA``
states CSV         ``date,block_id,state`` (states 1-based, 1 = wettest)
trace CSV          ``iteration,phase,step,elbo,delta``
"""

import csv
import datetime as dt
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import Hyperparameters, ModelDims
from .vbem import FitTrace

MODEL_FORMAT_VERSION = 1
MODEL_KIND = "spghmm-model"

_ARRAY = {"type": "array"}
_HYPER_SCHEMA = {
    "type": "object",
    "required": ["xi", "alpha", "zeta", "gamma_shape", "delta_rate"],
    "properties": {k: _ARRAY for k in ("xi", "alpha", "zeta", "gamma_shape", "delta_rate")},
}
MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["kind", "model_version", "dims", "prior", "posterior", "elbo_trace", "seed"],
    "properties": {
        "kind": {"const": MODEL_KIND},
        "model_version": {"type": "integer"},
        "dims": {
            "type": "object",
            "required": ["K", "L", "M"],
            "properties": {
                "K": {"type": "integer", "minimum": 1},
                "L": {"type": "integer", "minimum": 1},
                "M": {"type": "integer", "minimum": 1},
                "T": {"type": ["integer", "null"]},
                "N": {"type": ["integer", "null"]},
                "D": {"type": ["integer", "null"]},
            },
        },
        "prior": _HYPER_SCHEMA,
        "posterior": _HYPER_SCHEMA,
        "state_order": {"type": "array", "items": {"type": "integer"}},
        "elbo_trace": {
            "type": "object",
            "required": ["elbo", "phase", "step", "converged", "iterations_run"],
        },
        "seed": {"type": ["integer", "null"]},
        "location_ids": {"type": ["array", "null"], "items": {"type": "string"}},
    },
}


@dataclass(frozen=True)
class Block:
    block_id: int
    start: int
    length: int


@dataclass(frozen=True, eq=False)
class PrecipDataset:
    values: np.ndarray  # (T, L) mm/day, >= 0
    dates: np.ndarray  # (T,) datetime64[D]
    location_ids: list
    lat: np.ndarray = None
    lon: np.ndarray = None
    blocks: list = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DataError("values must be a finite nonnegative (T, L) matrix")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "dates", np.asarray(self.dates, dtype="datetime64[D]"))
        if len(self.dates) != v.shape[0] or len(self.location_ids) != v.shape[1]:
            raise DataError("dates/locations do not match the value matrix")
        if self.blocks:
            lengths = {b.length for b in self.blocks}
            if len(lengths) != 1:
                raise DataError(f"blocks have unequal lengths {sorted(lengths)}")

    @property
    def T(self):
        return self.values.shape[0]

    @property
    def L(self):
        return self.values.shape[1]

    @property
    def lengths(self):
        return [b.length for b in self.blocks] if self.blocks else None

    @property
    def block_ids(self):
        """Per-row block id (0 when unblocked)."""
        out = np.zeros(self.T, dtype=np.int64)
        for b in self.blocks or []:
            out[b.start : b.start + b.length] = b.block_id
        return out


def _parse_date(text, where):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise DataError(f"{where}: bad ISO date {text!r}") from None


def load_locations(path):
    """``location_id,lat,lon`` -> (ids, lat, lon) in file order."""
    ids, lat, lon = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for n, row in enumerate(reader, start=2):
            try:
                ids.append(row["location_id"].strip())
                lat.append(float(row["lat"] or "nan"))
                lon.append(float(row["lon"] or "nan"))
            except (KeyError, TypeError, ValueError):
                raise DataError(f"{path}:{n}: expected location_id,lat,lon") from None
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate location ids")
    return ids, np.array(lat), np.array(lon)


def load_long_csv(path, locations=None, dryness_threshold=0.0):
    """Pivot ``date,location_id,precip_mm`` records into a (T, L) dataset.

    ``locations`` is a path to ``locations.csv``; by default the file of that
    name beside ``path`` is used if present, otherwise location ids are
    taken in order of first appearance. Values below ``dryness_threshold``
    become exactly 0.
    """
    path = Path(path)
    if dryness_threshold < 0:
        raise DataError("dryness_threshold must be >= 0")
    if locations is None and (path.parent / "locations.csv").exists():
        locations = path.parent / "locations.csv"
    lat = lon = None
    known = None
    if locations is not None:
        ids, lat, lon = load_locations(locations)
        known = {k: i for i, k in enumerate(ids)}

    cells = {}
    seen_ids = {} if known is None else dict(known)
    lines = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["date", "location_id", "precip_mm"]:
            raise DataError(f"{path}:1: header must be date,location_id,precip_mm")
        for n, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{n}: expected 3 fields")
            d = _parse_date(row[0], f"{path}:{n}")
            loc = row[1].strip()
            if loc not in seen_ids:
                if known is not None:
                    raise DataError(f"{path}:{n}: unknown location id {loc!r}")
                seen_ids[loc] = len(seen_ids)
            try:
                v = float(row[2])
            except ValueError:
                raise DataError(f"{path}:{n}: bad precipitation value {row[2]!r}") from None
            if not np.isfinite(v) or v < 0:
                raise DataError(f"{path}:{n}: negative or non-finite precipitation {v}")
            key = (d, loc)
            if key in cells:
                raise DataError(f"{path}:{n}: duplicate record for {d} {loc} (first at line {lines[key]})")
            cells[key] = v
            lines[key] = n

    ids = list(seen_ids)
    dates = sorted({d for d, _ in cells})
    values = np.empty((len(dates), len(ids)))
    col = {k: i for i, k in enumerate(ids)}
    for i, d in enumerate(dates):
        for loc in ids:
            try:
                values[i, col[loc]] = cells[(d, loc)]
            except KeyError:
                raise DataError(f"{path}: missing record for date {d} location {loc}") from None
    values[values < dryness_threshold] = 0.0
    return PrecipDataset(values, np.array(dates, dtype="datetime64[D]"), ids, lat, lon)


def load_wide_csv(path, dryness_threshold=0.0):
    """``date,<id>,<id>,...`` matrix CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if not header or header[0] != "date" or len(header) < 2:
            raise DataError(f"{path}:1: header must be date,<location ids>")
        dates, rows = [], []
        for n, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{n}: expected {len(header)} fields")
            dates.append(_parse_date(row[0], f"{path}:{n}"))
            try:
                rows.append([float(x) for x in row[1:]])
            except ValueError:
                raise DataError(f"{path}:{n}: bad numeric value") from None
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 1)
    if np.any(values < 0):
        raise DataError(f"{path}: negative precipitation")
    if len(set(dates)) != len(dates):
        raise DataError(f"{path}: duplicate dates")
    order = np.argsort(np.array(dates, dtype="datetime64[D]"), kind="stable")
    values = values[order]
    values[values < dryness_threshold] = 0.0
    return PrecipDataset(values, np.array(dates, dtype="datetime64[D]")[order], header[1:])


def write_long_csv(dataset, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "location_id", "precip_mm"])
        for d, row in zip(dataset.dates.astype(str), dataset.values):
            for loc, v in zip(dataset.location_ids, row):
                w.writerow([d, loc, repr(float(v))])


def write_locations(dataset, path):
    lat = dataset.lat if dataset.lat is not None else np.full(dataset.L, np.nan)
    lon = dataset.lon if dataset.lon is not None else np.full(dataset.L, np.nan)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location_id", "lat", "lon"])
        for loc, a, b in zip(dataset.location_ids, lat, lon):
            w.writerow([loc] + ["" if np.isnan(v) else repr(float(v)) for v in (a, b)])


def make_blocks(dataset, season=((7, 1), (9, 30))):
    """Keep in-season days and group them into one block per year.

    ``season`` is ``((start_month, start_day), (end_month, end_day))``,
    inclusive and within one calendar year. Every year must cover its whole
    window and all windows must have the same length.
    """
    (sm, sd), (em, ed) = season
    dates = dataset.dates.astype(object)
    years = sorted({d.year for d in dates})
    keep, blocks, bad = [], [], []
    for y in years:
        start, end = dt.date(y, sm, sd), dt.date(y, em, ed)
        idx = [i for i, d in enumerate(dates) if start <= d <= end]
        if not idx:
            continue
        expected = (end - start).days + 1
        if len(idx) != expected:
            bad.append(f"{y} ({len(idx)} of {expected} days)")
        blocks.append(Block(block_id=y, start=len(keep), length=len(idx)))
        keep.extend(idx)
    if not blocks:
        raise DataError("no dates fall inside the season window")
    if len({b.length for b in blocks}) != 1 and not bad:
        bad = [f"{b.block_id} ({b.length} days)" for b in blocks]
    if bad:
        raise DataError("incomplete or unequal seasonal blocks: " + ", ".join(bad))
    keep = np.array(keep)
    return replace(
        dataset, values=dataset.values[keep], dates=dataset.dates[keep], blocks=blocks
    )


def block_dataset(values, n_blocks, days, start_year=2000, start=(7, 1), location_ids=None):
    """Wrap a (N*D, L) matrix as consecutive yearly blocks with synthetic dates."""
    values = np.asarray(values)
    if values.shape[0] != n_blocks * days:
        raise DataError("values do not split into n_blocks * days rows")
    dates, blocks = [], []
    for n in range(n_blocks):
        first = np.datetime64(dt.date(start_year + n, *start))
        dates.append(first + np.arange(days))
        blocks.append(Block(block_id=start_year + n, start=n * days, length=days))
    ids = location_ids or [f"L{i + 1}" for i in range(values.shape[1])]
    return PrecipDataset(values, np.concatenate(dates), ids, blocks=blocks)


def daily_dataset(values, start=dt.date(2000, 1, 1), location_ids=None):
    values = np.asarray(values)
    dates = np.datetime64(start) + np.arange(values.shape[0])
    ids = location_ids or [f"L{i + 1}" for i in range(values.shape[1])]
    return PrecipDataset(values, dates, ids)


def _hyper_to_json(h):
    return {k: v.tolist() for k, v in h.arrays().items()}


def _hyper_from_json(obj, dims, what):
    h = Hyperparameters(**{k: np.array(obj[k], dtype=np.float64) for k in _HYPER_SCHEMA["required"]})
    if (h.dims.K, h.dims.L, h.dims.M) != (dims.K, dims.L, dims.M):
        raise DataError(f"{what} arrays do not match dims {dims}")
    return h


def model_document(posterior, prior, dims, trace=None, seed=None, state_order=None, location_ids=None):
    trace_obj = {
        "elbo": list(trace.elbo) if trace else [],
        "phase": list(trace.phase) if trace else [],
        "step": [None if np.isnan(s) else s for s in trace.step] if trace else [],
        "converged": bool(trace.converged) if trace else False,
        "iterations_run": int(trace.iterations_run) if trace else 0,
    }
    return {
        "kind": MODEL_KIND,
        "model_version": MODEL_FORMAT_VERSION,
        "dims": {"K": dims.K, "L": dims.L, "M": dims.M, "T": dims.T, "N": dims.N, "D": dims.D},
        "prior": _hyper_to_json(prior),
        "posterior": _hyper_to_json(posterior),
        "state_order": [int(i) for i in (state_order if state_order is not None else range(dims.K))],
        "elbo_trace": trace_obj,
        "seed": seed,
        "location_ids": list(location_ids) if location_ids is not None else None,
    }


def save_model(posterior, prior, dims, trace, path, seed=None, state_order=None, location_ids=None, extra=None):
    """Write one JSON document; floats use shortest round-trip repr, so reloads are bit-exact.

    ``extra`` adds run metadata (for example the blocking used) as further keys.
    """
    doc = model_document(posterior, prior, dims, trace, seed, state_order, location_ids)
    doc.update(extra or {})
    text = json.dumps(doc, allow_nan=False)
    Path(path).write_text(text, encoding="utf-8")
    return doc


@dataclass(frozen=True, eq=False)
class SavedModel:
    posterior: Hyperparameters
    prior: Hyperparameters
    dims: ModelDims
    trace: object
    seed: object
    state_order: list
    location_ids: list


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: unreadable model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("kind") != MODEL_KIND:
        raise DataError(f"{path}: not a model file")
    if doc.get("model_version") != MODEL_FORMAT_VERSION:
        raise DataError(f"{path}: model_version {doc.get('model_version')} != {MODEL_FORMAT_VERSION}")
    try:
        d = doc["dims"]
        dims = ModelDims(K=d["K"], L=d["L"], M=d["M"], T=d.get("T"), N=d.get("N"), D=d.get("D"))
        prior = _hyper_from_json(doc["prior"], dims, "prior")
        posterior = _hyper_from_json(doc["posterior"], dims, "posterior")
        t = doc["elbo_trace"]
        trace = FitTrace(
            elbo=list(t["elbo"]),
            phase=list(t["phase"]),
            step=[float("nan") if s is None else s for s in t["step"]],
            converged=bool(t["converged"]),
            iterations_run=int(t["iterations_run"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed model file ({exc})") from None
    return SavedModel(
        posterior, prior, dims, trace, doc.get("seed"), doc.get("state_order"), doc.get("location_ids")
    )


def write_trace_csv(trace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "phase", "step", "elbo", "delta"])
        for i, p, s, e, d in trace.rows():
            w.writerow([i, p, "" if np.isnan(s) else repr(s), repr(e), "" if np.isnan(d) else repr(d)])


def write_states_csv(dates, block_ids, states, path):
    """States are written 1-based."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "block_id", "state"])
        for d, b, s in zip(np.asarray(dates, dtype="datetime64[D]").astype(str), block_ids, states):
            w.writerow([d, int(b), int(s) + 1])


def read_states_csv(path):
    """-> (dates, block_ids, 0-based states)."""
    dates, blocks, states = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for n, row in enumerate(reader, start=2):
            try:
                dates.append(_parse_date(row["date"], f"{path}:{n}"))
                blocks.append(int(row["block_id"]))
                states.append(int(row["state"]) - 1)
            except (KeyError, TypeError, ValueError):
                raise DataError(f"{path}:{n}: expected date,block_id,state") from None
    return np.array(dates, dtype="datetime64[D]"), np.array(blocks), np.array(states)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return None if np.isnan(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(obj, path):
    """JSON with NaN (no-data) written as null."""
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2), encoding="utf-8")
