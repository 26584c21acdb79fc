"""Relativistic decay-vertex sampling and space-like-separation estimates.

The pair is produced moving along the beam (z) axis; in the pair rest frame
the two mesons fly back to back with speed ``meson_cm_speed`` in an
isotropic direction and decay after exponentially distributed proper times.
Each decay vertex is the meson four-velocity scaled by its proper time.

Two separation criteria are provided.  ``FULL_INTERVAL`` uses the Minkowski
sign of |dr|^2 - c^2 dt^2 and is exactly Lorentz invariant, so it cannot
depend on the production boost.  ``LONGITUDINAL`` uses only the beam-axis
separation dz, mirroring what an asymmetric collider actually resolves; it
is frame dependent by construction.  Quantitative curves under the
longitudinal criterion are therefore model dependent and labeled as such.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .montecarlo import chunk_rng
from .params import MesonParams

C_LIGHT = 2.99792458e8  # m/s

# Upsilon(4S) -> B Bbar kinematics, GeV/c^2.
PARENT_MASS_GEV = 10.5796
MESON_MASS_GEV = 5.2795


def default_meson_speed(
    parent_mass: float = PARENT_MASS_GEV, meson_mass: float = MESON_MASS_GEV
) -> float:
    """Meson speed (units of c) in the pair rest frame from the two masses."""
    energy = parent_mass / 2.0
    if energy <= meson_mass:
        raise ValueError("parent mass must exceed twice the meson mass")
    return math.sqrt(energy * energy - meson_mass * meson_mass) / energy


class SeparationCriterion(enum.Enum):
    """How two decay vertices are classified against the light cone."""

    FULL_INTERVAL = "full-interval"
    LONGITUDINAL = "longitudinal"


class Separation(enum.Enum):
    SPACELIKE = "spacelike"
    TIMELIKE = "timelike"
    LIGHTLIKE = "lightlike"


@dataclass(frozen=True)
class BoostConfig:
    """Lab boost of the pair plus the meson speed in the pair frame."""

    beta: float
    meson_cm_speed: float = field(default_factory=default_meson_speed)

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must be in [0, 1), got {self.beta}")
        if not 0.0 <= self.meson_cm_speed < 1.0:
            raise ValueError(f"meson_cm_speed must be in [0, 1), got {self.meson_cm_speed}")

    @property
    def gamma(self) -> float:
        return 1.0 / math.sqrt(1.0 - self.beta * self.beta)

    @property
    def beta_gamma(self) -> float:
        return self.beta * self.gamma


def derive_boost(beta_gamma: float, meson_cm_speed: float | None = None) -> BoostConfig:
    """Boost configuration from the product beta * gamma (e.g. 0.425)."""
    if beta_gamma < 0:
        raise ValueError(f"beta_gamma must be >= 0, got {beta_gamma}")
    beta = beta_gamma / math.sqrt(1.0 + beta_gamma * beta_gamma)
    if meson_cm_speed is None:
        return BoostConfig(beta=beta)
    return BoostConfig(beta=beta, meson_cm_speed=meson_cm_speed)


@dataclass(frozen=True)
class FourEvent:
    """Lab-frame decay vertex: coordinate time (s) and position (m)."""

    t: float
    r: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.r, dtype=float)
        if r.shape != (3,):
            raise ValueError(f"position must be a 3-vector, got shape {r.shape}")
        if not (math.isfinite(self.t) and np.isfinite(r).all()):
            raise ValueError("event components must be finite")
        object.__setattr__(self, "r", r)


def boost_event(event: FourEvent, velocity: np.ndarray) -> FourEvent:
    """Lorentz-boost an event into a frame moving with the given velocity (units of c)."""
    v = np.asarray(velocity, dtype=float)
    b2 = float(v @ v)
    if b2 >= 1.0:
        raise ValueError("boost speed must be < 1")
    if b2 == 0.0:
        return FourEvent(event.t, event.r.copy())
    g = 1.0 / math.sqrt(1.0 - b2)
    ct = C_LIGHT * event.t
    r_par = float(v @ event.r) / b2 * v
    r_perp = event.r - r_par
    ct_new = g * (ct - float(v @ event.r))
    r_par_new = g * (r_par - v * ct)
    return FourEvent(ct_new / C_LIGHT, r_perp + r_par_new)


def _lab_four_velocities(config: BoostConfig, n_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Four-velocities (gamma, gamma*u vector) of both mesons, boosted along z.

    n_hat has shape (n, 3); returns two arrays of shape (n, 4).
    """
    u = config.meson_cm_speed
    g_star = 1.0 / math.sqrt(1.0 - u * u)
    b = config.beta
    g = config.gamma
    out = []
    for sign in (+1.0, -1.0):
        vel = sign * u * n_hat  # (n, 3) in the pair frame
        u0 = np.full(n_hat.shape[0], g_star)
        ux, uy = g_star * vel[:, 0], g_star * vel[:, 1]
        uz_star = g_star * vel[:, 2]
        u0_lab = g * (u0 + b * uz_star)
        uz_lab = g * (uz_star + b * u0)
        out.append(np.stack([u0_lab, ux, uy, uz_lab], axis=1))
    return out[0], out[1]


def _isotropic_directions(rng: np.random.Generator, n: int) -> np.ndarray:
    vec = rng.normal(size=(n, 3))
    norm = np.linalg.norm(vec, axis=1, keepdims=True)
    # Degenerate zero-norm draws have probability zero; guard anyway.
    norm[norm == 0] = 1.0
    return vec / norm


def _sample_vertices(
    config: BoostConfig,
    params: MesonParams,
    fixed_delta_t: float | None,
    rng: np.random.Generator,
    n: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized vertex pairs: returns (t1, r1, t2, r2) with shapes (n,), (n,3)."""
    if fixed_delta_t is None:
        tau1 = rng.exponential(scale=1.0 / params.gamma, size=n)
        tau2 = rng.exponential(scale=1.0 / params.gamma, size=n)
    else:
        if fixed_delta_t < 0:
            raise ValueError(f"fixed_delta_t must be >= 0, got {fixed_delta_t}")
        base = rng.exponential(scale=1.0 / params.gamma, size=n)
        late_first = rng.random(n) < 0.5
        tau1 = np.where(late_first, base + fixed_delta_t, base)
        tau2 = np.where(late_first, base, base + fixed_delta_t)
    n_hat = _isotropic_directions(rng, n)
    u1, u2 = _lab_four_velocities(config, n_hat)
    t1 = u1[:, 0] * tau1
    t2 = u2[:, 0] * tau2
    r1 = u1[:, 1:] * (C_LIGHT * tau1)[:, None]
    r2 = u2[:, 1:] * (C_LIGHT * tau2)[:, None]
    return t1, r1, t2, r2


def sample_pair_events(
    config: BoostConfig,
    params: MesonParams,
    rng: np.random.Generator,
    fixed_delta_t: float | None = None,
) -> tuple[FourEvent, FourEvent]:
    """One pair of decay vertices; proper times exponential unless pinned apart."""
    t1, r1, t2, r2 = _sample_vertices(config, params, fixed_delta_t, rng, 1)
    return FourEvent(float(t1[0]), r1[0]), FourEvent(float(t2[0]), r2[0])


LIGHTLIKE_GUARD = 1e-12


def _interval_discriminants(
    dt: np.ndarray, dr: np.ndarray, criterion: SeparationCriterion
) -> tuple[np.ndarray, np.ndarray]:
    """(discriminant, scale): spacelike where discriminant > guard * scale."""
    ct2 = (C_LIGHT * dt) ** 2
    if criterion is SeparationCriterion.FULL_INTERVAL:
        rr = np.sum(dr * dr, axis=-1)
    elif criterion is SeparationCriterion.LONGITUDINAL:
        rr = dr[..., 2] ** 2
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    return rr - ct2, rr + ct2


def classify_separation(
    e1: FourEvent, e2: FourEvent, criterion: SeparationCriterion = SeparationCriterion.FULL_INTERVAL
) -> Separation:
    """Light-cone classification with a relative guard band around zero.

    Discriminants within LIGHTLIKE_GUARD of zero (relative to the interval
    scale) report lightlike instead of flapping on floating-point noise.
    """
    disc, scale = _interval_discriminants(
        np.asarray(e1.t - e2.t), (e1.r - e2.r)[None, :], criterion
    )
    d, s = float(disc[0]), float(scale[0])
    if abs(d) <= LIGHTLIKE_GUARD * s:
        return Separation.LIGHTLIKE
    return Separation.SPACELIKE if d > 0 else Separation.TIMELIKE


@dataclass(frozen=True)
class PsEstimate:
    p_s: float
    stderr: float
    n_samples: int


def spacelike_probability(
    config: BoostConfig,
    params: MesonParams,
    delta_t: float,
    criterion: SeparationCriterion,
    n_samples: int,
    seed: int,
) -> PsEstimate:
    """Monte Carlo fraction of space-like vertex pairs at fixed proper-time difference."""
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if delta_t < 0:
        raise ValueError(f"delta_t must be >= 0, got {delta_t}")
    chunk = 1 << 16
    done = 0
    index = 0
    hits = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        rng = chunk_rng(seed, index)
        t1, r1, t2, r2 = _sample_vertices(config, params, delta_t, rng, m)
        disc, scale = _interval_discriminants(t1 - t2, r1 - r2, criterion)
        hits += int((disc > LIGHTLIKE_GUARD * scale).sum())
        done += m
        index += 1
    p = hits / n_samples
    return PsEstimate(p, math.sqrt(p * (1.0 - p) / n_samples), n_samples)


@dataclass(frozen=True)
class PsPoint:
    delta_t: float
    p_s: float
    stderr: float
    above_threshold: bool


@dataclass(frozen=True)
class PsCurve:
    rows: list[PsPoint]
    threshold: float
    required_dt_max: float
    attainable: bool
    covers_required_range: bool


def required_delta_t_max(params: MesonParams) -> float:
    """Largest time difference used by the optimal Bell combination, 3 pi / (4 delta_m)."""
    return 3.0 * math.pi / (4.0 * params.delta_m)


def ps_curve(
    config: BoostConfig,
    params: MesonParams,
    dt_grid: np.ndarray,
    criterion: SeparationCriterion,
    n_samples: int,
    seed: int,
) -> PsCurve:
    """Space-like fraction over a time-difference grid, compared to the mixing threshold.

    The summary flag says whether the fraction stays above 2 - sqrt(2) over
    the whole range of time differences a conclusive combination needs.
    """
    dt_grid = np.asarray(dt_grid, dtype=float)
    if dt_grid.size == 0:
        raise ValueError("dt_grid must be non-empty")
    if (np.diff(dt_grid) <= 0).any() or dt_grid[0] < 0:
        raise ValueError("dt_grid must be ascending and non-negative")
    threshold = 2.0 - math.sqrt(2.0)
    rows = []
    for k, dt in enumerate(dt_grid):
        est = spacelike_probability(config, params, float(dt), criterion, n_samples, seed + k)
        rows.append(PsPoint(float(dt), est.p_s, est.stderr, est.p_s > threshold))
    req = required_delta_t_max(params)
    covers = bool(dt_grid[-1] >= req)
    needed = [r for r in rows if r.delta_t <= req]
    attainable = covers and all(r.above_threshold for r in needed)
    return PsCurve(rows, threshold, req, attainable, covers)
