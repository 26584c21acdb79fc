"""CHSH-type combinations, the loosened local bound, and feasibility scans.

When only time differences are observable, the four-correlation combination

    R = |C(dt_11') + C(dt_12') + C(dt_21') - C(dt_22')|

is bounded for a restricted local model not by 2 but by

    R <= 2 + 4 * integral_0^(tau_max - tau_min) eta_tilde(t; dt_bar) dt,

where the tau are the pairwise minima of the four measurement times.  For
the exponential family this closes to 2 + 2 (1 - exp(-2 gamma (tau_max -
tau_min))).  A local test is conclusive only where the quantum maximum
2 sqrt(2) exceeds that bound, which is what the scans below decide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .montecarlo import chunk_rng
from .params import MesonParams, TimePair
from .qm import qm_correlation_delta
from .quadrature import QuadratureSpec, bisect_root, integrate_adaptive

QM_MAX = 2.0 * math.sqrt(2.0)

_PAIRS = ((0, 1), (0, 3), (2, 1), (2, 3))  # (t1,t1'), (t1,t2'), (t2,t1'), (t2,t2')


class MonotonicityError(ValueError):
    """The supplied strip density is not monotone where the bound needs it."""


@dataclass(frozen=True)
class TimeQuadruple:
    """Four measurement times (t1, t1', t2, t2') in seconds."""

    t1: float
    t1p: float
    t2: float
    t2p: float

    def __post_init__(self) -> None:
        for name in ("t1", "t1p", "t2", "t2p"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    def _times(self) -> tuple[float, float, float, float]:
        return (self.t1, self.t1p, self.t2, self.t2p)

    def delta_ts(self) -> tuple[float, float, float, float]:
        """|t_i - t_j'| in the order (1,1'), (1,2'), (2,1'), (2,2')."""
        t = self._times()
        return tuple(abs(t[i] - t[j]) for i, j in _PAIRS)

    def taus(self) -> tuple[float, float, float, float]:
        """min(t_i, t_j') in the same pair order."""
        t = self._times()
        return tuple(min(t[i], t[j]) for i, j in _PAIRS)

    @property
    def tau_min(self) -> float:
        return min(self.taus())

    @property
    def tau_max(self) -> float:
        return max(self.taus())

    @property
    def dt_bar(self) -> float:
        """Largest |t_i - t_j'| among the pairs whose tau attains tau_max."""
        taus = self.taus()
        dts = self.delta_ts()
        top = max(taus)
        return max(d for tau, d in zip(taus, dts) if tau == top)


def chsh_cell(
    corr: Callable[[TimePair], float], a: float, ap: float, b: float, bp: float
) -> float:
    """|C(a,b) + C(a',b) + C(a',b') - C(a,b')| for a cell-level correlation."""
    return abs(
        corr(TimePair(a, b))
        + corr(TimePair(ap, b))
        + corr(TimePair(ap, bp))
        - corr(TimePair(a, bp))
    )


def r_factor(corr_delta: Callable[[float], float], q: TimeQuadruple) -> float:
    """The four-correlation combination over the quadruple's time differences.

    The minus sign sits on the (2,2') term.
    """
    d11, d12, d21, d22 = q.delta_ts()
    return abs(corr_delta(d11) + corr_delta(d12) + corr_delta(d21) - corr_delta(d22))


def qm_r_factor(params: MesonParams, q: TimeQuadruple) -> float:
    """R with the quantum correlation -cos(delta_m dt)."""
    return r_factor(lambda dt: qm_correlation_delta(params, dt), q)


def _check_monotone(eta_tilde_fn, dt_bar: float, t_hi: float, n_probe: int = 1000) -> None:
    # Sampling-based verification; a heuristic, documented as such.
    t = np.linspace(0.0, max(t_hi, 1e-300), n_probe)
    vals = np.array([eta_tilde_fn(ti, dt_bar) for ti in t])
    if not np.isfinite(vals).all() or (vals < 0).any():
        raise MonotonicityError("eta_tilde must be finite and non-negative for t >= 0")
    scale = max(vals.max(), 1e-300)
    if (np.diff(vals) > 1e-9 * scale).any():
        raise MonotonicityError("eta_tilde is not non-increasing in t on the probed range")
    for dt in np.linspace(0.0, 2.0 * dt_bar + 1e-300, 32):
        lo = eta_tilde_fn(0.5 * t_hi, dt)
        hi = eta_tilde_fn(0.5 * t_hi, dt + 0.1 * (dt_bar + t_hi))
        if hi > lo + 1e-9 * scale:
            raise MonotonicityError("eta_tilde is not non-increasing in delta_t")


def lrt_bound(
    eta_tilde_fn: Callable[[float, float], float],
    q: TimeQuadruple,
    quadrature_spec: QuadratureSpec | None = None,
) -> float:
    """Loosened local bound 2 + 4 * integral of eta_tilde(t; dt_bar) over the tau spread.

    eta_tilde_fn(t, delta_t) must be monotone non-increasing in both
    arguments on t >= 0 (verified by sampling) and integrate to 1/2 on the
    half line.
    """
    spread = q.tau_max - q.tau_min
    probe_hi = max(2.0 * spread, q.dt_bar, 1e-300)
    _check_monotone(eta_tilde_fn, q.dt_bar, probe_hi)
    if spread == 0.0:
        return 2.0
    rel_tol = quadrature_spec.rel_tol if quadrature_spec is not None else 1e-9
    max_nodes = quadrature_spec.max_nodes if quadrature_spec is not None else 1 << 20
    integral = integrate_adaptive(
        lambda t: eta_tilde_fn(t, q.dt_bar),
        0.0,
        spread,
        rel_tol=rel_tol,
        max_nodes=max_nodes,
    )
    bound = 2.0 + 4.0 * integral
    if not 2.0 - 1e-9 <= bound <= 4.0 + 1e-9:
        raise ValueError(f"bound {bound} outside [2, 4]; eta_tilde is not normalized to 1/2")
    return min(max(bound, 2.0), 4.0)


def lrt_bound_exponential(params: MesonParams, q: TimeQuadruple) -> float:
    """Closed form of the loosened bound for the exponential strip density."""
    spread = q.tau_max - q.tau_min
    return 2.0 + 2.0 * (1.0 - math.exp(-2.0 * params.gamma * spread))


def quadruple_theta(params: MesonParams, theta: float) -> TimeQuadruple:
    """The one-parameter family (theta, 2 theta, 3 theta, 0) / delta_m."""
    s = theta / params.delta_m
    return TimeQuadruple(s, 2.0 * s, 3.0 * s, 0.0)


@dataclass(frozen=True)
class ThetaScan:
    theta: np.ndarray
    r_qm: np.ndarray
    lrt_bound: np.ndarray


def theta_scan(
    params: MesonParams, theta_min: float, theta_max: float, steps: int
) -> ThetaScan:
    """Quantum R and the loosened bound over a uniform grid of theta.

    Along this family the quantum curve is |3 cos(theta) - cos(3 theta)| and
    the tau spread is 2 theta / delta_m.
    """
    if not (0.0 <= theta_min < theta_max <= math.pi):
        raise ValueError(f"need 0 <= theta_min < theta_max <= pi, got [{theta_min}, {theta_max}]")
    if steps < 2:
        raise ValueError(f"steps must be >= 2, got {steps}")
    thetas = np.linspace(theta_min, theta_max, steps)
    r_qm = np.empty(steps)
    bound = np.empty(steps)
    for k, th in enumerate(thetas):
        quad = quadruple_theta(params, float(th))
        r_qm[k] = qm_r_factor(params, quad)
        bound[k] = lrt_bound_exponential(params, quad)
    return ThetaScan(thetas, r_qm, bound)


def x_threshold(
    bound_at_optimum: Callable[[float], float] | None = None,
    lo: float = 1.0,
    hi: float = 100.0,
    tol: float = 1e-10,
) -> float:
    """Smallest oscillation ratio x at which the bound drops to the quantum maximum.

    Solves bound(x) = 2 sqrt(2) by bisection; the default bound is the
    exponential-family value 2 + 2 (1 - exp(-pi / x)) at the optimal theta =
    pi / 4.  (Closed form: pi / ln(1 / (2 - sqrt(2))) ~ 5.8743.)  Bisection
    is kept so user-supplied bound families follow the same code path.
    """
    if bound_at_optimum is None:
        bound_at_optimum = lambda x: 2.0 + 2.0 * (1.0 - math.exp(-math.pi / x))  # noqa: E731
    return bisect_root(lambda x: bound_at_optimum(x) - QM_MAX, lo, hi, tol=tol)


def mixed_bound(p: float) -> float:
    """Bound 2p + 4(1-p) when only a fraction p of events is space-like separated."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    return 4.0 - 2.0 * p


def p_threshold() -> float:
    """Space-like fraction above which the mixed bound dips below 2 sqrt(2)."""
    return 2.0 - math.sqrt(2.0)


@dataclass(frozen=True)
class SearchResult:
    max_margin: float
    argmax: TimeQuadruple
    n_samples: int
    seed: int


def combination_search(
    params: MesonParams,
    n_samples: int,
    seed: int,
    t_range: tuple[float, float] | None = None,
    chunk: int = 1 << 16,
) -> SearchResult:
    """Seeded random search for quadruples where quantum R beats the local bound.

    Samples quadruples uniformly over t_range^4 and maximizes
    margin = R_qm - bound_exponential.  Chunked sub-seeded sampling makes the
    result independent of any parallel execution order; ties on the margin
    break lexicographically on the quadruple.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if t_range is None:
        t_range = (0.0, 10.0 / params.gamma)
    lo, hi = t_range
    if not (0.0 <= lo < hi):
        raise ValueError(f"invalid t_range {t_range}")

    best_margin = -math.inf
    best_q: tuple[float, ...] | None = None
    done = 0
    index = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        rng = chunk_rng(seed, index)
        t = rng.uniform(lo, hi, size=(m, 4))
        d = np.stack([np.abs(t[:, i] - t[:, j]) for i, j in _PAIRS])
        r = np.abs(
            -np.cos(params.delta_m * d[0])
            - np.cos(params.delta_m * d[1])
            - np.cos(params.delta_m * d[2])
            + np.cos(params.delta_m * d[3])
        )
        taus = np.stack([np.minimum(t[:, i], t[:, j]) for i, j in _PAIRS])
        spread = taus.max(axis=0) - taus.min(axis=0)
        margin = r - (2.0 + 2.0 * (1.0 - np.exp(-2.0 * params.gamma * spread)))
        k = int(np.argmax(margin))
        cand_margin = float(margin[k])
        cand_q = tuple(float(v) for v in t[k])
        if cand_margin > best_margin or (
            cand_margin == best_margin and (best_q is None or cand_q < best_q)
        ):
            best_margin = cand_margin
            best_q = cand_q
        done += m
        index += 1

    assert best_q is not None
    return SearchResult(best_margin, TimeQuadruple(*best_q), n_samples, seed)


@dataclass(frozen=True)
class BellReport:
    """Outcome of one R-versus-bound comparison."""

    r_value: float
    lrt_bound: float
    qm_max: float
    margin: float
    verdict: str  # "violates_lrt" | "consistent_with_lrt"

    @classmethod
    def from_values(cls, r_value: float, bound: float) -> "BellReport":
        margin = r_value - bound
        verdict = "violates_lrt" if margin > 0 else "consistent_with_lrt"
        return cls(r_value, bound, QM_MAX, margin, verdict)


def bell_report(
    params: MesonParams, q: TimeQuadruple, corr_delta: Callable[[float], float] | None = None
) -> BellReport:
    """Evaluate R for the given correlation (quantum by default) against the bound."""
    if corr_delta is None:
        r = qm_r_factor(params, q)
    else:
        r = r_factor(corr_delta, q)
    return BellReport.from_values(r, lrt_bound_exponential(params, q))
