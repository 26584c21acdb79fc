"""Restricted local-realistic models and their diagnostics.

A *restricted* model factorizes the total hidden-variable density into a
time-independent part rho(lambda) and a temporal density eta(t_l, t_r), and
its two outcome functions each see only the decay time on their own side.
Both restrictions are structural here: ``outcome_a(lam, t)`` simply has no
way to read the partner's time.  The diagnostics at the bottom test the
observable consequences of the restrictions on event samples, which is all
that can be done from data.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy.special import gammaincc, ndtri

from .montecarlo import (
    CorrelationEstimate,
    EventBatch,
    bin_cells,
    estimate_correlation,
)
from .params import DecayRecord, MesonParams, TimePair
from .quadrature import QuadratureConvergenceError, QuadratureSpec, simpson_nodes_weights

# A hidden value is an opaque real vector; a sample of n of them is (n, dim).
HiddenVar = np.ndarray


class InsufficientDataError(ValueError):
    """An event sample is too thin for the requested diagnostic."""

    def __init__(self, message: str, cells: list[tuple[int, int]] | None = None):
        super().__init__(message)
        self.cells = cells or []


def sign_pm(x: np.ndarray | float) -> np.ndarray:
    """Sign with the tie sign(0) = +1, as a +/-1 integer array."""
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int64)


class RestrictedLrtModel(ABC):
    """Deterministic hidden-variable model with factorized densities.

    Subclasses supply the hidden-value sampler, the two one-sided outcome
    functions and the temporal density.  All samplers take an explicit
    generator owned by the caller; instances hold no mutable state.
    """

    name: str
    params: MesonParams

    @abstractmethod
    def sample_lambda(self, rng: np.random.Generator, n: int) -> HiddenVar:
        """Draw n hidden values from rho(lambda); shape (n, lambda_dim)."""

    @abstractmethod
    def outcome_a(self, lam: HiddenVar, t: np.ndarray) -> np.ndarray:
        """Left outcome, +/-1 per row of lam; sees only the left decay time."""

    @abstractmethod
    def outcome_b(self, lam: HiddenVar, t: np.ndarray) -> np.ndarray:
        """Right outcome, +/-1 per row of lam; sees only the right decay time."""

    def eta(self, t_l, t_r):
        """Temporal density, unit mass over the positive quadrant."""
        g = self.params.gamma
        return g * g * np.exp(-g * (np.asarray(t_l) + np.asarray(t_r)))

    def sample_times(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Draw decay-time pairs from eta (exponential family by default)."""
        times = rng.exponential(scale=1.0 / self.params.gamma, size=(2, n))
        return times[0], times[1]

    def eta_marginals(self) -> tuple[Callable, Callable] | None:
        """One-sided densities (eta_l, eta_r) when eta factorizes, else None."""
        g = self.params.gamma
        marginal = lambda t: g * np.exp(-g * np.asarray(t))  # noqa: E731
        return marginal, marginal


class ConstantAnticorrelated(RestrictedLrtModel):
    """lambda uniform on {-1, +1}; left outcome lambda, right outcome -lambda."""

    def __init__(self, params: MesonParams):
        self.name = "const-anti"
        self.params = params

    def sample_lambda(self, rng: np.random.Generator, n: int) -> HiddenVar:
        return rng.choice((-1.0, 1.0), size=(n, 1))

    def outcome_a(self, lam: HiddenVar, t: np.ndarray) -> np.ndarray:
        return lam[:, 0].astype(np.int64)

    def outcome_b(self, lam: HiddenVar, t: np.ndarray) -> np.ndarray:
        return -lam[:, 0].astype(np.int64)


class OscillatingSign(RestrictedLrtModel):
    """Phase lambda uniform on [0, 2pi); outcomes are opposite square waves.

    The cell correlation is the triangle wave -1 + 2|phi|/pi of the phase
    difference phi = delta_m (t_l - t_r), the extremal correlation a local
    model can produce for this geometry.
    """

    def __init__(self, params: MesonParams):
        self.name = "osc-sign"
        self.params = params

    def sample_lambda(self, rng: np.random.Generator, n: int) -> HiddenVar:
        return rng.uniform(0.0, 2.0 * np.pi, size=(n, 1))

    def outcome_a(self, lam: HiddenVar, t: np.ndarray) -> np.ndarray:
        return sign_pm(np.cos(self.params.delta_m * np.asarray(t) + lam[:, 0]))

    def outcome_b(self, lam: HiddenVar, t: np.ndarray) -> np.ndarray:
        return -sign_pm(np.cos(self.params.delta_m * np.asarray(t) + lam[:, 0]))


class UnrestrictedDemoModel:
    """Joint sampler reproducing the quantum correlation -cos(delta_m dt).

    Not a RestrictedLrtModel: the distribution of its hidden outcome pair
    depends on both decay times, which is exactly the homogeneity violation
    the diagnostics are meant to flag.
    """

    def __init__(self, params: MesonParams):
        self.name = "demo-qm"
        self.params = params

    def sample_times(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        times = rng.exponential(scale=1.0 / self.params.gamma, size=(2, n))
        return times[0], times[1]

    def sample_pair(self, t_l: np.ndarray, t_r: np.ndarray, rng: np.random.Generator):
        """Outcome pair (a, b) with P(a = b) = (1 - cos(delta_m dt)) / 2."""
        t_l = np.asarray(t_l)
        t_r = np.asarray(t_r)
        p_same = 0.5 * (1.0 - np.cos(self.params.delta_m * (t_l - t_r)))
        same = rng.random(t_l.shape) < p_same
        first = np.where(rng.random(t_l.shape) < 0.5, 1, -1).astype(np.int64)
        return first, np.where(same, first, -first).astype(np.int64)

    def cell_correlation(self, times: TimePair, n: int, rng: np.random.Generator) -> CorrelationEstimate:
        a, b = self.sample_pair(np.full(n, times.t_l), np.full(n, times.t_r), rng)
        value = float(np.mean(a * b))
        return CorrelationEstimate(value, math.sqrt(max(0.0, 1.0 - value**2) / n), n)

    def delta_correlation(self, delta_t: float, n: int, rng: np.random.Generator) -> CorrelationEstimate:
        """Strip correlation at fixed dt: average over t drawn from the strip density."""
        if delta_t < 0:
            raise ValueError(f"delta_t must be >= 0, got {delta_t}")
        t = rng.exponential(scale=0.5 / self.params.gamma, size=n)
        a, b = self.sample_pair(t + delta_t, t, rng)
        value = float(np.mean(a * b))
        return CorrelationEstimate(value, math.sqrt(max(0.0, 1.0 - value**2) / n), n)


MODEL_REGISTRY: dict[str, Callable[[MesonParams], object]] = {
    "const-anti": ConstantAnticorrelated,
    "osc-sign": OscillatingSign,
    "demo-qm": UnrestrictedDemoModel,
}


def make_model(name: str, params: MesonParams):
    try:
        factory = MODEL_REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(MODEL_REGISTRY))
        raise ValueError(f"unknown model {name!r} (known: {known})") from None
    return factory(params)


def lrt_correlation_cell(
    model: RestrictedLrtModel, times: TimePair, n_lambda: int, rng: np.random.Generator
) -> CorrelationEstimate:
    """Monte Carlo cell correlation: average of A(lam, t_l) B(lam, t_r)."""
    if n_lambda < 1:
        raise ValueError(f"n_lambda must be >= 1, got {n_lambda}")
    if hasattr(model, "cell_correlation"):
        return model.cell_correlation(times, n_lambda, rng)
    lam = model.sample_lambda(rng, n_lambda)
    prod = model.outcome_a(lam, np.full(n_lambda, times.t_l)) * model.outcome_b(
        lam, np.full(n_lambda, times.t_r)
    )
    value = float(np.mean(prod))
    stderr = math.sqrt(max(0.0, 1.0 - value * value) / n_lambda)
    return CorrelationEstimate(value, stderr, n_lambda)


def _delta_correlation_quadrature(
    model: RestrictedLrtModel,
    delta_t: float,
    n_lambda: int,
    rng: np.random.Generator,
    spec: QuadratureSpec,
) -> CorrelationEstimate:
    # One shared lambda panel across all quadrature nodes keeps the
    # integrand deterministic, so node doubling actually converges.  The
    # panel makes the integrand a staircase, so doubling is stopped once the
    # change drops below the tolerance or well under the Monte Carlo error,
    # whichever is coarser; chasing quadrature digits below the sampling
    # noise would never terminate.
    lam = model.sample_lambda(rng, n_lambda)

    def per_lambda_integrals(n_panels: int) -> tuple[np.ndarray, float]:
        t, w = simpson_nodes_weights(0.0, spec.cutoff, n_panels)
        eta_up = np.asarray(model.eta(t + delta_t, t), dtype=float)
        eta_lo = np.asarray(model.eta(t, t + delta_t), dtype=float)
        w_up = w * eta_up
        w_lo = w * eta_lo
        den = float((w_up + w_lo).sum())
        num = np.empty(n_lambda)
        t_rep = None
        # Cap the tiled (lambda x node) work arrays at ~2M elements.
        block = max(1, min(n_lambda, (1 << 21) // t.size))
        for lo in range(0, n_lambda, block):
            lam_blk = lam[lo:lo + block]
            m = lam_blk.shape[0]
            if t_rep is None or t_rep.size != m * t.size:
                t_rep = np.tile(t, m)
            lam_rep = np.repeat(lam_blk, t.size, axis=0)
            a_up = model.outcome_a(lam_rep, t_rep + delta_t).reshape(m, t.size)
            b_lo = model.outcome_b(lam_rep, t_rep).reshape(m, t.size)
            a_lo = model.outcome_a(lam_rep, t_rep).reshape(m, t.size)
            b_up = model.outcome_b(lam_rep, t_rep + delta_t).reshape(m, t.size)
            num[lo:lo + m] = (a_up * b_lo) @ w_up + (a_lo * b_up) @ w_lo
        return num, den

    n_panels = 32
    prev = None
    while True:
        num, den = per_lambda_integrals(n_panels)
        if den <= 0:
            raise ValueError("temporal density integrates to zero along the strip")
        per_lambda = num / den
        value = float(np.mean(per_lambda))
        stderr = float(np.std(per_lambda, ddof=1) / math.sqrt(n_lambda)) if n_lambda > 1 else 0.0
        if prev is not None and abs(value - prev) <= max(spec.rel_tol, 0.25 * stderr):
            return CorrelationEstimate(value, stderr, n_lambda)
        prev = value
        n_panels *= 2
        if 2 * n_panels + 1 > spec.max_nodes:
            raise QuadratureConvergenceError(
                f"strip correlation did not converge within {spec.max_nodes} nodes"
            )


def lrt_correlation_delta(
    model,
    delta_t: float,
    n_lambda: int,
    rng: np.random.Generator,
    quadrature_spec: QuadratureSpec | None = None,
) -> CorrelationEstimate:
    """Correlation of the |t_l - t_r| = delta_t subensemble under the model.

    For restricted models this is the eta-weighted strip integral of the
    lambda-averaged outcome product, self-normalized by the strip mass.
    Models exposing ``delta_correlation`` (the joint-sampling demo) are
    estimated directly instead.
    """
    if delta_t < 0:
        raise ValueError(f"delta_t must be >= 0, got {delta_t}")
    if n_lambda < 1:
        raise ValueError(f"n_lambda must be >= 1, got {n_lambda}")
    if hasattr(model, "delta_correlation"):
        return model.delta_correlation(delta_t, n_lambda, rng)
    if quadrature_spec is None:
        # rel_tol acts on the correlation value, which is O(1) by construction.
        quadrature_spec = QuadratureSpec(cutoff=50.0 / model.params.gamma, rel_tol=1e-3)
    return _delta_correlation_quadrature(model, delta_t, n_lambda, rng, quadrature_spec)


def joint_probability_table(
    model: RestrictedLrtModel, times: TimePair, n_lambda: int, rng: np.random.Generator
) -> dict[tuple[int, int], float]:
    """All four flavor-pair joint probabilities from one lambda panel.

    The indicator functions partition unity per hidden value, so the four
    returned entries sum to eta(t_l, t_r) exactly, not just in expectation.
    """
    if n_lambda < 1:
        raise ValueError(f"n_lambda must be >= 1, got {n_lambda}")
    lam = model.sample_lambda(rng, n_lambda)
    a = model.outcome_a(lam, np.full(n_lambda, times.t_l))
    b = model.outcome_b(lam, np.full(n_lambda, times.t_r))
    eta = float(model.eta(times.t_l, times.t_r))
    table = {}
    for i in (+1, -1):
        for j in (+1, -1):
            table[(i, j)] = eta * float(np.mean((a == i) & (b == j)))
    return table


def lrt_joint_probability(
    model: RestrictedLrtModel,
    i: int,
    j: int,
    times: TimePair,
    n_lambda: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo joint probability density of flavors (i, j) at (t_l, t_r)."""
    if (int(i), int(j)) not in {(1, 1), (1, -1), (-1, 1), (-1, -1)}:
        raise ValueError("flavors must be +1 or -1")
    return joint_probability_table(model, times, n_lambda, rng)[(int(i), int(j))]


@dataclass(frozen=True)
class TimeGridSpec:
    """Uniform evaluation grid on [t_min, t_max] x [t_min, t_max]."""

    t_max: float
    n: int
    t_min: float = 0.0

    def __post_init__(self) -> None:
        if self.t_min < 0:
            raise ValueError(f"grid times must be >= 0, got t_min={self.t_min}")
        if self.t_max <= self.t_min:
            raise ValueError("t_max must exceed t_min")
        if self.n < 2:
            raise ValueError(f"grid needs >= 2 points per axis, got {self.n}")

    def points(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n)


@dataclass(frozen=True)
class FactorizationReport:
    holds: bool
    max_deviation: float
    tolerance: float


def check_marginal_factorization(
    model_or_eta, grid_spec: TimeGridSpec, tolerance: float = 1e-9
) -> FactorizationReport:
    """Test eta(t_l, t_r) = eta_l(t_l) eta_r(t_r) on a grid.

    The separable candidate is the normalized outer product of row and
    column sums, which reconstructs any exactly separable density; the
    reported deviation is the worst absolute error relative to the grid's
    peak density.
    """
    eta = model_or_eta.eta if hasattr(model_or_eta, "eta") else model_or_eta
    t = grid_spec.points()
    tl, tr = np.meshgrid(t, t, indexing="ij")
    m = np.asarray(eta(tl, tr), dtype=float)
    if not np.isfinite(m).all() or (m < 0).any():
        raise ValueError("eta must be finite and non-negative on the grid")
    peak = m.max()
    if peak <= 0:
        raise ValueError("eta vanishes on the whole grid")
    u = m.sum(axis=1)
    v = m.sum(axis=0)
    approx = np.outer(u, v) / m.sum()
    deviation = float(np.max(np.abs(m - approx)) / peak)
    return FactorizationReport(deviation < tolerance, deviation, tolerance)


@dataclass(frozen=True)
class CellGridSpec:
    """Binning for the homogeneity diagnostic: square cells on [0, t_max)."""

    bin_width: float
    t_max: float

    def __post_init__(self) -> None:
        if self.bin_width <= 0 or self.t_max <= 0:
            raise ValueError("bin_width and t_max must be > 0")


@dataclass(frozen=True)
class HomogeneityReport:
    consistent: bool
    statistic: float
    threshold: float
    chi_square: float
    chi_square_dof: int
    n_rectangles: int
    worst_rectangle: tuple[int, int, int, int] | None


def _records_to_batch(events: Iterable[DecayRecord]) -> EventBatch:
    from .montecarlo import BatchMeta  # local import to avoid cycle at module load

    recs = list(events)
    t_l = np.array([r.times.t_l for r in recs])
    t_r = np.array([r.times.t_r for r in recs])
    f_l = np.array([int(r.flavor_l) for r in recs], dtype=np.int8)
    f_r = np.array([int(r.flavor_r) for r in recs], dtype=np.int8)
    params = MesonParams(label="events", delta_m=1.0, gamma=1.0)
    return EventBatch(t_l, t_r, f_l, f_r, BatchMeta("records", 0, len(recs), params))


def _chi_square_homogeneity(tables: np.ndarray) -> tuple[float, int]:
    """Chi-square that K frequency pairs share one rate; tables is (K, 2)."""
    col = tables.sum(axis=0)
    row = tables.sum(axis=1)
    total = tables.sum()
    if total == 0 or (col == 0).any():
        return 0.0, 0
    expected = np.outer(row, col) / total
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(expected > 0, (tables - expected) ** 2 / expected, 0.0)
    return float(terms.sum()), tables.shape[0] - 1


def check_homogeneity(
    events: EventBatch | Iterable[DecayRecord],
    grid: CellGridSpec,
    min_occupancy: int = 50,
    significance: float = 0.01,
    max_cells_per_axis: int = 6,
) -> HomogeneityReport:
    """Necessary-condition diagnostic for the factorized hidden-variable density.

    Two observable consequences are tested on binned events:

    * one-sided flavor frequencies may depend only on that side's own decay
      time (chi-square across each row and column of cells);
    * cell correlations must respect every rectangle Bell combination
      |C(a,b) + C(a',b) + C(a',b') - C(a,b')| <= 2.

    The statistic is the largest standardized exceedance over all
    comparisons; ``consistent`` means it stays below the Bonferroni-adjusted
    normal quantile for the requested family-wise significance.  Passing is
    necessary, not sufficient, for the restricted structure.
    """
    if min_occupancy < 1:
        raise ValueError(f"min_occupancy must be >= 1, got {min_occupancy}")
    batch = events if isinstance(events, EventBatch) else _records_to_batch(events)
    cells = bin_cells(batch, grid.bin_width, grid.t_max)
    per_cell = cells.counts.sum(axis=(2, 3))
    thin = [(int(a), int(b)) for a, b in zip(*np.nonzero(per_cell < min_occupancy))]
    if thin:
        raise InsufficientDataError(
            f"{len(thin)} cell(s) below the minimum occupancy of {min_occupancy}: "
            f"{thin[:8]}{'...' if len(thin) > 8 else ''}",
            cells=thin,
        )

    k = cells.n_cells
    # Part 1: left-flavor frequency constant across each row of cells, and
    # right-flavor frequency constant across each column.
    chi2 = 0.0
    dof = 0
    left = cells.counts.sum(axis=3)   # (cl, cr, flavor_l)
    right = cells.counts.sum(axis=2)  # (cl, cr, flavor_r)
    for cl in range(k):
        c, d = _chi_square_homogeneity(left[cl])
        chi2 += c
        dof += d
    for cr in range(k):
        c, d = _chi_square_homogeneity(right[:, cr])
        chi2 += c
        dof += d
    if dof > 0:
        p_marginal = float(gammaincc(dof / 2.0, chi2 / 2.0))
        z_marginal = float(ndtri(min(max(1.0 - p_marginal, 1e-300), 1.0 - 1e-16)))
    else:
        z_marginal = 0.0

    # Part 2: rectangle Bell combinations among the best-occupied cells.
    order = np.argsort(per_cell.sum(axis=1))[::-1][:max_cells_per_axis]
    l_cells = np.sort(order)
    order = np.argsort(per_cell.sum(axis=0))[::-1][:max_cells_per_axis]
    r_cells = np.sort(order)
    corr = {}
    for cl in l_cells:
        for cr in r_cells:
            est = estimate_correlation(cells.cell_table(cl, cr))
            corr[(cl, cr)] = est
    z_bell = 0.0
    worst = None
    n_rect = 0
    for ia, a in enumerate(l_cells):
        for ap in l_cells[ia + 1:]:
            for ib, b in enumerate(r_cells):
                for bp in r_cells[ib + 1:]:
                    n_rect += 1
                    cs = (corr[(a, b)], corr[(ap, b)], corr[(ap, bp)], corr[(a, bp)])
                    s = cs[0].value + cs[1].value + cs[2].value - cs[3].value
                    excess = abs(s) - 2.0
                    if excess <= 0:
                        continue
                    se = math.sqrt(sum(c.stderr**2 for c in cs))
                    z = excess / se if se > 0 else math.inf
                    if z > z_bell:
                        z_bell = z
                        worst = (int(a), int(ap), int(b), int(bp))

    n_comparisons = n_rect + (1 if dof > 0 else 0)
    statistic = max(z_marginal, z_bell, 0.0)
    if n_comparisons == 0:
        return HomogeneityReport(True, 0.0, math.inf, chi2, dof, 0, None)
    threshold = float(ndtri(1.0 - significance / n_comparisons))
    return HomogeneityReport(
        consistent=bool(statistic < threshold),
        statistic=statistic,
        threshold=threshold,
        chi_square=chi2,
        chi_square_dof=dof,
        n_rectangles=n_rect,
        worst_rectangle=worst,
    )
