import math

import pytest

from mesonbell import B_PARAMS, Flavor, K_PARAMS, MesonParams, TimePair
from mesonbell.params import species_params


def test_flavor_numeric_image():
    assert {int(f) for f in Flavor} == {+1, -1}
    assert int(Flavor.B0) == 1
    assert int(Flavor.B0BAR) == -1
    assert Flavor.from_value(1) is Flavor.B0
    assert Flavor.from_value(-1) is Flavor.B0BAR
    with pytest.raises(ValueError):
        Flavor.from_value(0)


def test_builtin_species_ratios():
    assert math.isclose(B_PARAMS.x, 5.02 / 6.49)
    assert math.isclose(K_PARAMS.x, 0.95)
    assert species_params("B") is B_PARAMS
    assert species_params("K") is K_PARAMS
    with pytest.raises(ValueError, match="unknown species"):
        species_params("D")


@pytest.mark.parametrize("delta_m,gamma", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0),
                                           (1.0, -2.0), (math.inf, 1.0), (1.0, math.nan)])
def test_params_validation(delta_m, gamma):
    with pytest.raises(ValueError):
        MesonParams(label="bad", delta_m=delta_m, gamma=gamma)


def test_params_derived():
    p = MesonParams(label="p", delta_m=3.0, gamma=2.0)
    assert p.x == 1.5
    assert p.lifetime == 0.5


def test_time_pair():
    tp = TimePair(2.0, 0.5)
    assert tp.delta_t == 1.5
    assert TimePair(0.5, 2.0).delta_t == 1.5
    with pytest.raises(ValueError):
        TimePair(-1.0, 0.0)
    with pytest.raises(ValueError):
        TimePair(0.0, -1e-30)
