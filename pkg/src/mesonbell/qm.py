"""Quantum-mechanical flavor correlation and decay-rate densities.

For the antisymmetric two-meson state the joint decay-rate density into
flavors ``(i, j)`` at times ``(t_l, t_r)`` is

    rate_ij(t_l, t_r) = (gamma^2 / 4) * exp(-gamma (t_l + t_r))
                        * (1 - i*j*cos(delta_m (t_l - t_r)))

which is the unique density whose count-weighted correlation equals
``-cos(delta_m (t_l - t_r))`` while both single-meson decay laws stay purely
exponential.  ``_self_check`` below asserts those two identities at import
time so nothing downstream can build on a wrong completion.
"""

from __future__ import annotations

import math

from .params import Flavor, MesonParams, TimePair

FLAVOR_PAIRS: tuple[tuple[int, int], ...] = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def qm_correlation(params: MesonParams, times: TimePair) -> float:
    """Flavor correlation -cos(delta_m (t_l - t_r)); depends only on |t_l - t_r|."""
    return -math.cos(params.delta_m * (times.t_l - times.t_r))


def qm_correlation_delta(params: MesonParams, delta_t: float) -> float:
    """Same correlation addressed by the time difference alone."""
    if delta_t < 0:
        raise ValueError(f"delta_t must be >= 0, got {delta_t}")
    return -math.cos(params.delta_m * delta_t)


def qm_joint_rate(params: MesonParams, i: Flavor | int, j: Flavor | int, times: TimePair) -> float:
    """Joint decay-rate density (1/s^2) into flavors (i, j) at (t_l, t_r)."""
    ij = int(i) * int(j)
    if abs(ij) != 1:
        raise ValueError("flavors must be +1 or -1")
    g = params.gamma
    osc = 1.0 - ij * math.cos(params.delta_m * (times.t_l - times.t_r))
    return 0.25 * g * g * math.exp(-g * (times.t_l + times.t_r)) * osc


def eta_exponential(params: MesonParams, times: TimePair) -> float:
    """Flavor-summed temporal density gamma^2 exp(-gamma (t_l + t_r)), unit mass on the quadrant."""
    g = params.gamma
    return g * g * math.exp(-g * (times.t_l + times.t_r))


def n_of_delta(params: MesonParams, delta_t: float) -> float:
    """Strip normalization: integral of the two strip densities, = gamma exp(-gamma delta_t)."""
    if delta_t < 0:
        raise ValueError(f"delta_t must be >= 0, got {delta_t}")
    return params.gamma * math.exp(-params.gamma * delta_t)


def eta_tilde(params: MesonParams, t: float, delta_t: float) -> float:
    """Strip-normalized density: 0 for t < 0, else gamma exp(-2 gamma t).

    For the exponential family the delta_t dependence cancels between the
    strip density and its normalization; the half-line integral is 1/2.
    """
    if delta_t < 0:
        raise ValueError(f"delta_t must be >= 0, got {delta_t}")
    if t < 0:
        return 0.0
    return params.gamma * math.exp(-2.0 * params.gamma * t)


def expected_counts(n_pairs: int, bin_width: float, rate: float) -> float:
    """Expected number of decays in a (bin_width)^2 time cell with the given joint rate."""
    if n_pairs < 0:
        raise ValueError(f"n_pairs must be >= 0, got {n_pairs}")
    if bin_width <= 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    if rate < 0:
        raise ValueError(f"rate must be >= 0, got {rate}")
    return n_pairs * bin_width * bin_width * rate


def _self_check() -> None:
    # Identity 1: count-weighted correlation of the joint rate reproduces
    # qm_correlation.  Identity 2: the flavor sum collapses to eta_exponential.
    p = MesonParams(label="selfcheck", delta_m=0.9, gamma=1.3)
    for tl, tr in ((0.0, 0.0), (0.4, 1.1), (2.3, 0.2)):
        tp = TimePair(tl, tr)
        rates = {(i, j): qm_joint_rate(p, i, j, tp) for (i, j) in FLAVOR_PAIRS}
        total = sum(rates.values())
        corr = sum(i * j * r for (i, j), r in rates.items()) / total
        if abs(corr - qm_correlation(p, tp)) > 1e-12:
            raise AssertionError("joint-rate correlation identity violated")
        if abs(total - eta_exponential(p, tp)) > 1e-12 * total:
            raise AssertionError("joint-rate flavor-sum identity violated")


_self_check()
