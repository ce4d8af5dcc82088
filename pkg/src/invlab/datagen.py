"""Synthetic products, Gamma demand traces and CSV ingestion."""
from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .envs import EconStatics, EnvSpec
from .gammadist import gamma_params
from .rollout import RolloutContext, static_matrix

ECON_COLUMNS = ("id", "p", "c", "c_e", "c_r", "r", "b", "h", "mu", "nu")

_ECON_STREAM = 0
_TRACE_STREAM = 1


def _generator(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass
class Products:
    """Columnar product table; every field is an (n,) array."""

    id: np.ndarray
    p: np.ndarray
    c: np.ndarray
    c_e: np.ndarray
    c_r: np.ndarray
    r: np.ndarray
    b: np.ndarray
    h: np.ndarray
    mu: np.ndarray
    nu: np.ndarray

    def __len__(self) -> int:
        return len(self.id)

    @property
    def shape(self) -> np.ndarray:
        return gamma_params(self.mu, self.nu)[0]

    @property
    def scale(self) -> np.ndarray:
        return gamma_params(self.mu, self.nu)[1]

    @property
    def econ(self) -> EconStatics:
        return EconStatics(p=self.p, c=self.c, h=self.h, b=self.b, c_e=self.c_e, c_r=self.c_r, r=self.r)

    def take(self, idx) -> "Products":
        return Products(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})


def sample_products(n: int, seed: int, dual: bool = False, returns: bool = False) -> Products:
    """Draw product economics and demand parameters.

    The uniforms are drawn in a fixed block regardless of flags, so turning a
    flag on changes only the derived columns.
    """
    if n < 1:
        raise ValueError("need at least one product")
    rng = _generator(seed, _ECON_STREAM)
    p = rng.exponential(100.0, n)
    u = rng.uniform(size=(6, n))
    h = rng.exponential(5.0, n)
    mu = rng.exponential(100.0, n)
    c = p * u[0]
    b = 10.0 * u[3]
    nu = u[4]
    c_e = c.copy()
    c_r = c - np.minimum(b * u[5], u[1] * c) if dual else c.copy()
    r = c * u[2] if returns else np.zeros(n)
    # a zero coefficient of variation has probability zero but would break the Gamma fit
    nu = np.maximum(nu, 1e-12)
    return Products(np.arange(n), p, c, c_e, c_r, r, b, h, mu, nu)


def sample_trace(shape: float, scale: float, length: int, seed: int, product_id: int) -> np.ndarray:
    rng = _generator(seed, _TRACE_STREAM, int(product_id))
    return rng.gamma(shape, scale, length)


def sample_traces(products: Products, H: int, T: int, seed: int) -> np.ndarray:
    """(n, H+T) demands for periods -H..T-1, one independent stream per product."""
    if H < 1 or T < 1:
        raise ValueError("H and T must be >= 1")
    shape, scale = products.shape, products.scale
    out = np.empty((len(products), H + T))
    for i, pid in enumerate(products.id):
        out[i] = sample_trace(shape[i], scale[i], H + T, seed, pid)
    return out


@dataclass
class Dataset:
    products: Products
    demand: np.ndarray
    H: int
    features: np.ndarray | None = None

    def __post_init__(self):
        if self.demand.shape[0] != len(self.products):
            raise ValueError("one demand row per product is required")
        if self.demand.shape[1] <= self.H:
            raise ValueError("traces must be longer than the history window")

    def __len__(self) -> int:
        return len(self.products)

    @property
    def T(self) -> int:
        return self.demand.shape[1] - self.H

    def context(self, spec: EnvSpec, idx=None) -> RolloutContext:
        idx = np.arange(len(self)) if idx is None else np.asarray(idx)
        prods = self.products.take(idx)
        econ = prods.econ
        return RolloutContext(
            demand=self.demand[idx],
            econ=econ,
            H=self.H,
            static=static_matrix(spec, econ),
            features=None if self.features is None else self.features[idx],
            shape=prods.shape,
            scale=prods.scale,
            product_ids=prods.id,
        )


def synthetic_dataset(n: int, H: int, T: int, seed: int, dual: bool = False, returns: bool = False) -> Dataset:
    products = sample_products(n, seed, dual, returns)
    return Dataset(products, sample_traces(products, H, T, seed), H)


# ---------------------------------------------------------------- CSV


def save_products(path, products: Products) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ECON_COLUMNS)
        for i in range(len(products)):
            w.writerow([int(products.id[i])] + [repr(float(getattr(products, c)[i])) for c in ECON_COLUMNS[1:]])


def load_products(path) -> Products:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(ECON_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        rows = list(reader)
    cols = {c: np.array([float(r[c]) for r in rows]) for c in ECON_COLUMNS}
    cols["id"] = cols["id"].astype(np.int64)
    return Products(**cols)


class TraceFormatError(ValueError):
    pass


@dataclass
class LoadedTraces:
    product_ids: np.ndarray
    demand: np.ndarray
    features: np.ndarray | None
    feature_names: list[str]


def load_traces(path, event_periods: list[int] | None = None, event_scale: float = 1.0 / 52.0) -> LoadedTraces:
    """Read a dense ``product_id, period_index, demand[, features...]`` CSV.

    With ``event_periods`` an extra distance-to-next-event channel (scaled by
    ``event_scale``) is appended to the features.
    """
    series: dict[str, dict[int, list[float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TraceFormatError(f"{path}: empty file") from None
        if header[:3] != ["product_id", "period_index", "demand"]:
            raise TraceFormatError(f"{path}: header must start with product_id,period_index,demand")
        extra = header[3:]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise TraceFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                period = int(row[1])
                values = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
            if values[0] < 0:
                raise TraceFormatError(f"{path}:{lineno}: negative demand for product {row[0]}")
            per = series.setdefault(row[0].strip(), {})
            if period in per:
                raise TraceFormatError(f"{path}:{lineno}: duplicate period {period} for product {row[0]}")
            per[period] = values
    if not series:
        raise TraceFormatError(f"{path}: no data rows")
    lengths = set()
    for pid, per in series.items():
        lo, hi = min(per), max(per)
        for t in range(lo, hi + 1):
            if t not in per:
                raise TraceFormatError(f"{path}: product {pid} is missing period {t}")
        lengths.add((lo, hi))
    if len(lengths) != 1:
        raise TraceFormatError(f"{path}: products cover different period ranges {sorted(lengths)}")
    lo, hi = lengths.pop()
    ids = list(series)
    data = np.array([[series[pid][t] for t in range(lo, hi + 1)] for pid in ids])
    demand = data[:, :, 0]
    feats = [data[:, :, 1:].transpose(0, 2, 1)] if extra else []
    names = list(extra)
    if event_periods is not None:
        dist = distance_to_event(np.arange(lo, hi + 1), event_periods) * event_scale
        feats.append(np.broadcast_to(dist, (len(ids), 1, hi - lo + 1)).copy())
        names.append("distance_to_event")
    features = np.concatenate(feats, axis=1) if feats else None
    try:
        pid_arr = np.array([int(p) for p in ids])
    except ValueError:
        pid_arr = np.array(ids)
    return LoadedTraces(pid_arr, demand, features, names)


def distance_to_event(periods, event_periods) -> np.ndarray:
    """Periods until the next event at or after each period (0 on the event itself)."""
    periods = np.asarray(periods)
    events = np.sort(np.asarray(event_periods))
    if events.size == 0:
        raise ValueError("event calendar is empty")
    j = np.searchsorted(events, periods, side="left")
    out = np.full(periods.shape, np.nan)
    ok = j < events.size
    out[ok] = events[j[ok]] - periods[ok]
    if not ok.all():
        raise ValueError("event calendar must extend past the last period")
    return out


def save_traces(path, product_ids, demand: np.ndarray, start: int = 0) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["product_id", "period_index", "demand"])
        for pid, row in zip(product_ids, demand):
            for t, d in enumerate(row):
                w.writerow([pid, start + t, repr(float(d))])
