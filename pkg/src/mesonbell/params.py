"""Physical constants and the elementary event types of a meson-pair decay.

All times are in seconds and all rates in 1/second.  Every formula in this
package consumes only the dimensionless products ``delta_m * t`` and
``gamma * t``, so no unit registry is needed; "natural units" (``gamma = 1``)
are therefore equally valid as long as times are fed in the same units.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class Flavor(enum.IntEnum):
    """Particle/antiparticle tag of a neutral meson, as a +/-1 outcome."""

    B0 = +1
    B0BAR = -1

    @classmethod
    def from_value(cls, value: int) -> "Flavor":
        if value == 1:
            return cls.B0
        if value == -1:
            return cls.B0BAR
        raise ValueError(f"flavor value must be +1 or -1, got {value!r}")


@dataclass(frozen=True)
class MesonParams:
    """Oscillation frequency and decay width of a neutral-meson species.

    ``delta_m`` is the mass-splitting angular frequency of the weak
    eigenstates (1/s) and ``gamma`` the total decay width (1/s).  The ratio
    ``x = delta_m / gamma`` controls how many flavor oscillations fit into
    one lifetime, which is what decides the feasibility of a Bell test.
    """

    label: str
    delta_m: float
    gamma: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta_m) and self.delta_m > 0):
            raise ValueError(f"delta_m must be finite and > 0, got {self.delta_m}")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be finite and > 0, got {self.gamma}")

    @property
    def x(self) -> float:
        """Dimensionless oscillation-to-decay ratio delta_m / gamma."""
        return self.delta_m / self.gamma

    @property
    def lifetime(self) -> float:
        """Mean lifetime 1 / gamma in seconds."""
        return 1.0 / self.gamma


# B0 system: delta_m and gamma in 1/s.
B_PARAMS = MesonParams(label="B", delta_m=5.02e11, gamma=6.49e11)

# K0 system: only the ratio x ~ 0.95 is fixed here, expressed in natural
# units (gamma = 1).  Feed times in units of the K lifetime when using it.
K_PARAMS = MesonParams(label="K", delta_m=0.95, gamma=1.0)

BUILTIN_SPECIES: dict[str, MesonParams] = {"B": B_PARAMS, "K": K_PARAMS}


def species_params(name: str) -> MesonParams:
    """Look up a built-in species by label ("B" or "K")."""
    try:
        return BUILTIN_SPECIES[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_SPECIES))
        raise ValueError(f"unknown species {name!r} (known: {known})") from None


@dataclass(frozen=True)
class TimePair:
    """Decay times (seconds) of the left and right meson of one pair."""

    t_l: float
    t_r: float

    def __post_init__(self) -> None:
        if self.t_l < 0 or self.t_r < 0:
            raise ValueError(f"decay times must be >= 0, got ({self.t_l}, {self.t_r})")

    @property
    def delta_t(self) -> float:
        return abs(self.t_l - self.t_r)


@dataclass(frozen=True)
class DecayRecord:
    """One simulated pair decay: two decay times plus two flavor outcomes."""

    times: TimePair
    flavor_l: Flavor
    flavor_r: Flavor
