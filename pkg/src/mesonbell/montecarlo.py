"""Seeded event generation, time-cell binning, and count-based correlation.

Reproducibility contract: generation is chunked into fixed-size blocks and
each block draws from its own counter-based stream keyed by
``(seed, block_index)``.  The assembled batch is therefore byte-identical
for a given ``(seed, n, model)`` no matter how many worker threads execute
the blocks.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterator, Mapping

import numpy as np

from .params import DecayRecord, Flavor, MesonParams, TimePair

if TYPE_CHECKING:
    from .lrt import RestrictedLrtModel

CHUNK_SIZE = 1 << 16

# Flavor +1 maps to row/column 0, flavor -1 to row/column 1 in count arrays.
FLAVOR_INDEX: dict[int, int] = {+1: 0, -1: 1}


class EmptySubensembleError(ValueError):
    """A correlation was requested for a bin containing no events."""


class ConfigurationError(ValueError):
    """A model lacks a capability required by the requested operation."""


def chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    """Counter-based generator for one block, keyed by (seed, chunk_index)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(chunk_index,))
    return np.random.Generator(np.random.Philox(ss))


def _chunk_ranges(n: int) -> list[tuple[int, int, int]]:
    out = []
    for idx, start in enumerate(range(0, n, CHUNK_SIZE)):
        out.append((idx, start, min(start + CHUNK_SIZE, n)))
    return out


@dataclass(frozen=True)
class BatchMeta:
    model_id: str
    seed: int
    n: int
    params: MesonParams


@dataclass(frozen=True)
class EventBatch:
    """Column-oriented batch of pair decays plus generation provenance."""

    t_l: np.ndarray
    t_r: np.ndarray
    flavor_l: np.ndarray
    flavor_r: np.ndarray
    meta: BatchMeta

    def __post_init__(self) -> None:
        n = self.meta.n
        for name in ("t_l", "t_r", "flavor_l", "flavor_r"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
        if n:
            if not (np.isfinite(self.t_l).all() and np.isfinite(self.t_r).all()):
                raise ValueError("decay times must be finite")
            if self.t_l.min(initial=0.0) < 0 or self.t_r.min(initial=0.0) < 0:
                raise ValueError("decay times must be >= 0")
            for name in ("flavor_l", "flavor_r"):
                if not np.isin(getattr(self, name), (-1, 1)).all():
                    raise ValueError(f"{name} entries must be +1 or -1")

    def __len__(self) -> int:
        return self.meta.n

    def record(self, k: int) -> DecayRecord:
        return DecayRecord(
            times=TimePair(float(self.t_l[k]), float(self.t_r[k])),
            flavor_l=Flavor.from_value(int(self.flavor_l[k])),
            flavor_r=Flavor.from_value(int(self.flavor_r[k])),
        )

    def records(self) -> Iterator[DecayRecord]:
        for k in range(len(self)):
            yield self.record(k)


def _assemble(parts: list[tuple[np.ndarray, ...]], meta: BatchMeta) -> EventBatch:
    if not parts:
        empty = np.empty(0)
        return EventBatch(empty, empty.copy(), np.empty(0, dtype=np.int8),
                          np.empty(0, dtype=np.int8), meta)
    cols = [np.concatenate([p[i] for p in parts]) for i in range(4)]
    return EventBatch(cols[0], cols[1], cols[2], cols[3], meta)


def _run_chunks(worker, n: int, n_threads: int) -> list[tuple[np.ndarray, ...]]:
    ranges = _chunk_ranges(n)
    if n_threads <= 1 or len(ranges) <= 1:
        return [worker(idx, hi - lo) for idx, lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        futures = [pool.submit(worker, idx, hi - lo) for idx, lo, hi in ranges]
        return [f.result() for f in futures]


def generate_qm_events(
    params: MesonParams, n: int, seed: int, n_threads: int = 1
) -> EventBatch:
    """Draw n pair decays from the quantum joint rate.

    Times are two independent exponentials with rate gamma; flavors are then
    drawn from the conditional table p_ij = (1 - i*j*cos(delta_m dt)) / 4.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")

    def worker(idx: int, m: int) -> tuple[np.ndarray, ...]:
        rng = chunk_rng(seed, idx)
        times = rng.exponential(scale=1.0 / params.gamma, size=(2, m))
        t_l, t_r = times[0], times[1]
        p_same = 0.5 * (1.0 - np.cos(params.delta_m * (t_l - t_r)))
        same = rng.random(m) < p_same
        first = np.where(rng.random(m) < 0.5, 1, -1).astype(np.int8)
        f_l = first
        f_r = np.where(same, first, -first).astype(np.int8)
        return t_l, t_r, f_l, f_r

    meta = BatchMeta(model_id="qm", seed=seed, n=n, params=params)
    return _assemble(_run_chunks(worker, n, n_threads), meta)


def generate_lrt_events(
    model: "RestrictedLrtModel", n: int, seed: int, n_threads: int = 1
) -> EventBatch:
    """Draw n pair decays from a restricted hidden-variable model.

    Per event: a hidden value from the model's density, a time pair from
    its temporal density, and the two deterministic outcomes.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if not hasattr(model, "sample_times"):
        raise ConfigurationError(f"model {model.name!r} does not expose a time sampler")

    def worker(idx: int, m: int) -> tuple[np.ndarray, ...]:
        rng = chunk_rng(seed, idx)
        t_l, t_r = model.sample_times(rng, m)
        lam = model.sample_lambda(rng, m)
        f_l = model.outcome_a(lam, t_l).astype(np.int8)
        f_r = model.outcome_b(lam, t_r).astype(np.int8)
        return t_l, t_r, f_l, f_r

    meta = BatchMeta(model_id=model.name, seed=seed, n=n, params=model.params)
    return _assemble(_run_chunks(worker, n, n_threads), meta)


def generate_model_events(model, n: int, seed: int, n_threads: int = 1) -> EventBatch:
    """Generate events from any registered model (restricted or joint-sampling)."""
    if hasattr(model, "outcome_a"):
        return generate_lrt_events(model, n, seed, n_threads=n_threads)
    if not hasattr(model, "sample_pair"):
        raise ConfigurationError(f"model {model.name!r} cannot generate events")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")

    def worker(idx: int, m: int) -> tuple[np.ndarray, ...]:
        rng = chunk_rng(seed, idx)
        t_l, t_r = model.sample_times(rng, m)
        f_l, f_r = model.sample_pair(t_l, t_r, rng)
        return t_l, t_r, f_l.astype(np.int8), f_r.astype(np.int8)

    meta = BatchMeta(model_id=model.name, seed=seed, n=n, params=model.params)
    return _assemble(_run_chunks(worker, n, n_threads), meta)


@dataclass(frozen=True)
class CellGrid:
    """Counts per (cell_l, cell_r, flavor_l, flavor_r) over a square time grid."""

    bin_width: float
    t_max: float
    counts: np.ndarray  # shape (n_cells, n_cells, 2, 2)
    overflow: int
    n_total: int

    @property
    def n_cells(self) -> int:
        return self.counts.shape[0]

    def __getitem__(self, key: tuple[int, int, int, int]) -> int:
        cl, cr, i, j = key
        return int(self.counts[cl, cr, FLAVOR_INDEX[i], FLAVOR_INDEX[j]])

    def cell_table(self, cell_l: int, cell_r: int) -> np.ndarray:
        """2x2 flavor table of one cell; rows/cols ordered (+1, -1)."""
        return self.counts[cell_l, cell_r]

    def cell_center(self, k: int) -> float:
        return (k + 0.5) * self.bin_width

    def __add__(self, other: "CellGrid") -> "CellGrid":
        if (self.bin_width, self.t_max) != (other.bin_width, other.t_max):
            raise ValueError("cannot merge grids with different binning")
        return CellGrid(self.bin_width, self.t_max, self.counts + other.counts,
                        self.overflow + other.overflow, self.n_total + other.n_total)


@dataclass(frozen=True)
class DeltaHistogram:
    """Counts per (|t_l - t_r| bin, flavor_l, flavor_r); both strips merged."""

    bin_width: float
    dt_max: float
    counts: np.ndarray  # shape (n_bins, 2, 2)
    overflow: int
    n_total: int

    @property
    def n_bins(self) -> int:
        return self.counts.shape[0]

    def __getitem__(self, key: tuple[int, int, int]) -> int:
        b, i, j = key
        return int(self.counts[b, FLAVOR_INDEX[i], FLAVOR_INDEX[j]])

    def bin_table(self, b: int) -> np.ndarray:
        return self.counts[b]

    def bin_center(self, b: int) -> float:
        return (b + 0.5) * self.bin_width

    def bin_of(self, delta_t: float) -> int:
        if not 0 <= delta_t < self.dt_max:
            raise ValueError(f"delta_t must be in [0, {self.dt_max}), got {delta_t}")
        return min(int(delta_t // self.bin_width), self.n_bins - 1)

    def __add__(self, other: "DeltaHistogram") -> "DeltaHistogram":
        if (self.bin_width, self.dt_max) != (other.bin_width, other.dt_max):
            raise ValueError("cannot merge histograms with different binning")
        return DeltaHistogram(self.bin_width, self.dt_max, self.counts + other.counts,
                              self.overflow + other.overflow, self.n_total + other.n_total)


def _flavor_idx(arr: np.ndarray) -> np.ndarray:
    # +1 -> 0, -1 -> 1
    return ((1 - arr) // 2).astype(np.intp)


def bin_cells(batch: EventBatch, bin_width: float, t_max: float) -> CellGrid:
    """Histogram a batch into square (t_l, t_r) cells; cell index = floor(t / width).

    Events with either time at or beyond t_max go to the overflow tally, so
    counts + overflow always equals the batch size.
    """
    if bin_width <= 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    if t_max <= 0:
        raise ValueError(f"t_max must be > 0, got {t_max}")
    n_cells = int(math.ceil(t_max / bin_width - 1e-9))
    il = np.floor(batch.t_l / bin_width).astype(np.int64)
    ir = np.floor(batch.t_r / bin_width).astype(np.int64)
    # Overflow strictly at t >= t_max; a cell straddling t_max is narrower.
    keep = (batch.t_l < t_max) & (batch.t_r < t_max)
    counts = np.zeros((n_cells, n_cells, 2, 2), dtype=np.int64)
    np.add.at(
        counts,
        (il[keep], ir[keep], _flavor_idx(batch.flavor_l[keep]), _flavor_idx(batch.flavor_r[keep])),
        1,
    )
    overflow = int((~keep).sum())
    if overflow:
        warnings.warn(f"{overflow} event(s) beyond t_max={t_max:g} tallied as overflow",
                      stacklevel=2)
    return CellGrid(bin_width, t_max, counts, overflow, len(batch))


def bin_delta(batch: EventBatch, bin_width: float, dt_max: float) -> DeltaHistogram:
    """Histogram a batch by |t_l - t_r|; the two strips of each difference merge."""
    if bin_width <= 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    if dt_max <= 0:
        raise ValueError(f"dt_max must be > 0, got {dt_max}")
    n_bins = int(math.ceil(dt_max / bin_width - 1e-9))
    delta = np.abs(batch.t_l - batch.t_r)
    b = np.floor(delta / bin_width).astype(np.int64)
    keep = delta < dt_max
    counts = np.zeros((n_bins, 2, 2), dtype=np.int64)
    np.add.at(
        counts,
        (b[keep], _flavor_idx(batch.flavor_l[keep]), _flavor_idx(batch.flavor_r[keep])),
        1,
    )
    overflow = int((~keep).sum())
    if overflow:
        warnings.warn(f"{overflow} event(s) beyond dt_max={dt_max:g} tallied as overflow",
                      stacklevel=2)
    return DeltaHistogram(bin_width, dt_max, counts, overflow, len(batch))


@dataclass(frozen=True)
class CorrelationEstimate:
    value: float
    stderr: float
    n_events: int


def estimate_correlation(counts: Mapping[tuple[int, int], int] | np.ndarray) -> CorrelationEstimate:
    """Count-based correlation sum(i*j*n_ij) / sum(n_ij) with binomial-style error."""
    if isinstance(counts, Mapping):
        table = np.zeros((2, 2), dtype=np.int64)
        for (i, j), v in counts.items():
            table[FLAVOR_INDEX[i], FLAVOR_INDEX[j]] = v
    else:
        table = np.asarray(counts)
        if table.shape != (2, 2):
            raise ValueError(f"count table must be 2x2, got shape {table.shape}")
    total = int(table.sum())
    if total < 1:
        raise EmptySubensembleError("no events in subensemble")
    signs = np.array([[1, -1], [-1, 1]])
    value = float((signs * table).sum()) / total
    stderr = math.sqrt(max(0.0, 1.0 - value * value) / total)
    return CorrelationEstimate(value, stderr, total)


@dataclass(frozen=True)
class DeltaCorrelationRow:
    dt_center: float
    value: float
    stderr: float
    n_events: int


def delta_correlation_table(hist: DeltaHistogram, min_events: int = 1) -> list[DeltaCorrelationRow]:
    """Per-bin correlation estimates, skipping bins below min_events."""
    rows = []
    for b in range(hist.n_bins):
        total = int(hist.counts[b].sum())
        if total < max(1, min_events):
            continue
        est = estimate_correlation(hist.counts[b])
        rows.append(DeltaCorrelationRow(hist.bin_center(b), est.value, est.stderr, est.n_events))
    return rows


EVENTS_CSV_HEADER = "t_l_s,t_r_s,flavor_l,flavor_r"


def write_events_csv(path: str | Path, batch: EventBatch) -> None:
    """Write events as CSV plus a JSON metadata sidecar at <path>.meta.json."""
    path = Path(path)
    lines = [EVENTS_CSV_HEADER]
    for k in range(len(batch)):
        lines.append(
            f"{float(batch.t_l[k])!r},{float(batch.t_r[k])!r},"
            f"{int(batch.flavor_l[k])},{int(batch.flavor_r[k])}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sidecar = {
        "model": batch.meta.model_id,
        "seed": batch.meta.seed,
        "n": batch.meta.n,
        "delta_m": batch.meta.params.delta_m,
        "gamma": batch.meta.params.gamma,
    }
    Path(str(path) + ".meta.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_events_csv(path: str | Path) -> EventBatch:
    """Read an events CSV and its sidecar back into a batch."""
    path = Path(path)
    raw = path.read_text(encoding="utf-8").strip().splitlines()
    if not raw or raw[0] != EVENTS_CSV_HEADER:
        raise ValueError(f"{path}: missing events header {EVENTS_CSV_HEADER!r}")
    body = raw[1:]
    n = len(body)
    t_l = np.empty(n)
    t_r = np.empty(n)
    f_l = np.empty(n, dtype=np.int8)
    f_r = np.empty(n, dtype=np.int8)
    for k, line in enumerate(body):
        a, b, c, d = line.split(",")
        t_l[k], t_r[k], f_l[k], f_r[k] = float(a), float(b), int(c), int(d)
    sidecar = json.loads(Path(str(path) + ".meta.json").read_text(encoding="utf-8"))
    params = MesonParams(label="custom", delta_m=sidecar["delta_m"], gamma=sidecar["gamma"])
    meta = BatchMeta(model_id=sidecar["model"], seed=sidecar["seed"], n=n, params=params)
    return EventBatch(t_l, t_r, f_l, f_r, meta)
