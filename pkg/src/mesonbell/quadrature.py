"""Small numerical kernel: adaptive quadrature, composite rules, bisection.

The adaptive integrator is a node-budgeted composite Simpson scheme.  It is
deliberately self-contained so its failure mode is a typed error with the
budget in the message instead of a silently inaccurate number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class QuadratureConvergenceError(RuntimeError):
    """Raised when an integral fails to reach tolerance within the node budget."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Cutoff and convergence policy for improper / sampled integrals."""

    cutoff: float
    rel_tol: float = 1e-9
    max_nodes: int = 1 << 20

    def __post_init__(self) -> None:
        if self.cutoff <= 0:
            raise ValueError(f"cutoff must be > 0, got {self.cutoff}")
        if self.rel_tol <= 0:
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.max_nodes < 8:
            raise ValueError(f"max_nodes must be >= 8, got {self.max_nodes}")


def integrate_adaptive(
    f: Callable[[float], float],
    a: float,
    b: float,
    rel_tol: float = 1e-9,
    max_nodes: int = 1 << 20,
) -> float:
    """Integrate f over [a, b] by adaptive Simpson with Richardson correction.

    The local acceptance test is |S_fine - S_coarse| / 15 against a tolerance
    apportioned by interval, targeting a relative error of rel_tol on the
    whole integral.  Exceeding max_nodes function evaluations raises
    QuadratureConvergenceError.
    """
    if b < a:
        raise ValueError(f"integration bounds out of order: [{a}, {b}]")
    if a == b:
        return 0.0

    evals = 0

    def feval(x: float) -> float:
        nonlocal evals
        evals += 1
        if evals > max_nodes:
            raise QuadratureConvergenceError(
                f"adaptive quadrature exceeded {max_nodes} nodes on [{a}, {b}]"
            )
        return f(x)

    fa, fm, fb = feval(a), feval(0.5 * (a + b)), feval(b)
    s_whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol = rel_tol * max(abs(s_whole), 1e-300)

    # Iterative stack of (a, b, fa, fm, fb, simpson, tol) panels.
    stack = [(a, b, fa, fm, fb, s_whole, tol)]
    total = 0.0
    while stack:
        xa, xb, ya, ym, yb, s, t = stack.pop()
        xm = 0.5 * (xa + xb)
        xlm = 0.5 * (xa + xm)
        xrm = 0.5 * (xm + xb)
        ylm = feval(xlm)
        yrm = feval(xrm)
        s_left = (xm - xa) / 6.0 * (ya + 4.0 * ylm + ym)
        s_right = (xb - xm) / 6.0 * (ym + 4.0 * yrm + yb)
        err = (s_left + s_right - s) / 15.0
        if abs(err) <= t or (xb - xa) <= abs(xb + xa) * 1e-15:
            total += s_left + s_right + err
        else:
            stack.append((xa, xm, ya, ylm, ym, s_left, 0.5 * t))
            stack.append((xm, xb, ym, yrm, yb, s_right, 0.5 * t))
    return total


def simpson_nodes_weights(a: float, b: float, n_panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite Simpson rule with n_panels panels."""
    if n_panels < 1:
        raise ValueError("n_panels must be >= 1")
    n = 2 * n_panels
    x = np.linspace(a, b, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (b - a) / (3.0 * n)
    return x, w


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
    max_iter: int = 256,
) -> float:
    """Root of f on [lo, hi] by bisection; endpoints must bracket a sign change."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
        raise ValueError(f"no sign change on [{lo}, {hi}]: f={flo:g}, {fhi:g}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or (hi - lo) < tol:
            return mid
        if math.copysign(1.0, fm) == math.copysign(1.0, flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)
