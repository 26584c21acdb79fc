import math

import numpy as np
import pytest

from mesonbell import (
    B_PARAMS,
    K_PARAMS,
    MesonParams,
    QM_MAX,
    TimeQuadruple,
    bell_report,
    bin_delta,
    chsh_cell,
    combination_search,
    estimate_correlation,
    generate_qm_events,
    lrt_bound,
    lrt_bound_exponential,
    mixed_bound,
    p_threshold,
    qm_correlation,
    qm_r_factor,
    r_factor,
    theta_scan,
    x_threshold,
)
from mesonbell.bell import MonotonicityError, quadruple_theta
from mesonbell.qm import eta_tilde


def optimum_quadruple(params: MesonParams) -> TimeQuadruple:
    dm = params.delta_m
    return TimeQuadruple(math.pi / 4 / dm, math.pi / 2 / dm, 3 * math.pi / 4 / dm, 0.0)


def test_quadruple_derived_quantities():
    q = TimeQuadruple(1.0, 2.0, 4.0, 0.5)
    assert q.delta_ts() == (1.0, 0.5, 2.0, 3.5)
    assert q.taus() == (1.0, 0.5, 2.0, 0.5)
    assert q.tau_min == 0.5 and q.tau_max == 2.0
    assert q.dt_bar == 2.0
    with pytest.raises(ValueError):
        TimeQuadruple(-1.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        TimeQuadruple(math.nan, 0.0, 0.0, 0.0)


def test_dt_bar_tie_takes_larger_difference():
    # Both (1,1') and (2,1') attain tau_max = 1; their differences are 1 and 2.
    q = TimeQuadruple(1.0, 2.0, 1.0, 3.0)
    assert q.tau_max == 1.0
    assert q.dt_bar == 2.0


def test_chsh_cell_anchors():
    assert chsh_cell(lambda tp: -1.0, 0.1, 0.2, 0.3, 0.4) == 2.0
    assert chsh_cell(lambda tp: 0.0, 0.1, 0.2, 0.3, 0.4) == 0.0
    dm = B_PARAMS.delta_m
    s = chsh_cell(
        lambda tp: qm_correlation(B_PARAMS, tp),
        0.0, math.pi / 2 / dm, math.pi / 4 / dm, 3 * math.pi / 4 / dm,
    )
    assert abs(s - QM_MAX) < 1e-12


def test_r_factor_anchors():
    assert r_factor(lambda dt: -1.0, TimeQuadruple(0.3, 0.9, 1.3, 0.0)) == 2.0
    assert abs(qm_r_factor(B_PARAMS, optimum_quadruple(B_PARAMS)) - QM_MAX) < 1e-12
    # Along the (theta, 2 theta, 3 theta, 0) family: |3 cos(t) - cos(3t)|.
    for theta in np.linspace(0.0, math.pi, 17):
        q = quadruple_theta(B_PARAMS, float(theta))
        expected = abs(3.0 * math.cos(theta) - math.cos(3.0 * theta))
        assert qm_r_factor(B_PARAMS, q) == pytest.approx(expected, abs=1e-12)
    assert qm_r_factor(B_PARAMS, quadruple_theta(B_PARAMS, math.pi / 3)) == pytest.approx(2.5)


def test_lrt_bound_degenerate_quadruple():
    q = TimeQuadruple(0.7, 0.7, 0.7, 0.7)
    assert lrt_bound(lambda t, dt: eta_tilde(B_PARAMS, t, dt), q) == 2.0
    assert lrt_bound_exponential(B_PARAMS, q) == 2.0


def test_lrt_bound_anchor_value():
    bound = lrt_bound_exponential(B_PARAMS, optimum_quadruple(B_PARAMS))
    assert abs(bound - 3.9656) < 5e-4
    assert bound == pytest.approx(
        2.0 + 2.0 * (1.0 - math.exp(-math.pi * B_PARAMS.gamma / B_PARAMS.delta_m)), rel=1e-15
    )
    assert round(bound, 2) == 3.97
    assert bound > QM_MAX


def test_lrt_bound_quadrature_matches_closed_form():
    rng = np.random.default_rng(20)
    for params in (B_PARAMS, K_PARAMS):
        fn = lambda t, dt: eta_tilde(params, t, dt)  # noqa: E731
        for _ in range(100):
            q = TimeQuadruple(*rng.uniform(0.0, 6.0 / params.gamma, size=4))
            a = lrt_bound(fn, q)
            b = lrt_bound_exponential(params, q)
            assert abs(a - b) < 1e-9 * b
            assert 2.0 <= b <= 4.0


def test_lrt_bound_rejects_non_monotone_density():
    q = TimeQuadruple(0.5, 1.5, 2.5, 0.0)
    with pytest.raises(MonotonicityError):
        lrt_bound(lambda t, dt: t, q)
    with pytest.raises(MonotonicityError):
        lrt_bound(lambda t, dt: math.exp(-t) * (1.0 + dt), q)


def test_theta_scan_fig2_anchors():
    scan = theta_scan(B_PARAMS, 0.0, math.pi / 2, 200)
    assert scan.theta.size == 200
    assert scan.r_qm[0] == pytest.approx(2.0, abs=1e-12)
    assert scan.lrt_bound[0] == pytest.approx(2.0, abs=1e-12)
    k = int(np.argmin(np.abs(scan.theta - math.pi / 4)))
    assert scan.r_qm[k] == pytest.approx(2.8284, abs=2e-3)
    assert scan.lrt_bound[k] == pytest.approx(3.9656, abs=2e-3)
    assert (scan.lrt_bound >= scan.r_qm).all()


def test_theta_scan_validation():
    with pytest.raises(ValueError):
        theta_scan(B_PARAMS, 0.5, 0.5, 10)
    with pytest.raises(ValueError):
        theta_scan(B_PARAMS, 0.0, 3.5, 10)
    with pytest.raises(ValueError):
        theta_scan(B_PARAMS, 0.0, 1.0, 1)


def test_x_threshold_defining_equation():
    x_star = x_threshold()
    assert abs((2.0 + 2.0 * (1.0 - math.exp(-math.pi / x_star))) - QM_MAX) < 1e-9
    assert abs(x_star - 5.874) < 1e-3
    assert abs(x_star - math.pi / math.log(1.0 / (2.0 - math.sqrt(2.0)))) < 1e-9
    assert B_PARAMS.x < x_star and K_PARAMS.x < x_star


def test_x_threshold_custom_bound_family():
    # Twice-as-slow falloff doubles the threshold ratio.
    x_star = x_threshold(lambda x: 2.0 + 2.0 * (1.0 - math.exp(-2.0 * math.pi / x)))
    assert abs(x_star - 2.0 * x_threshold()) < 1e-6


def test_mixed_bound_and_p_threshold():
    assert mixed_bound(1.0) == 2.0
    assert mixed_bound(0.0) == 4.0
    p_star = p_threshold()
    assert abs(p_star - (2.0 - math.sqrt(2.0))) < 1e-12
    assert abs(p_star - 0.585786) < 1e-6
    assert 0.5 < p_star < 0.6
    assert abs(mixed_bound(p_star) - QM_MAX) < 1e-12
    with pytest.raises(ValueError):
        mixed_bound(-0.01)
    with pytest.raises(ValueError):
        mixed_bound(1.01)


def test_qm_never_exceeds_tsirelson():
    rng = np.random.default_rng(21)
    worst = 0.0
    for _ in range(10_000):
        q = TimeQuadruple(*rng.uniform(0.0, 10.0 / B_PARAMS.gamma, size=4))
        worst = max(worst, qm_r_factor(B_PARAMS, q))
    assert worst <= QM_MAX + 1e-9


def test_combination_search_b_params_finds_no_violation():
    result = combination_search(B_PARAMS, 100_000, seed=20260808)
    assert result.max_margin < 0.0
    again = combination_search(B_PARAMS, 100_000, seed=20260808)
    assert again.max_margin == result.max_margin
    assert again.argmax == result.argmax


def test_combination_search_large_x_finds_violation():
    params = MesonParams(label="x=20", delta_m=20.0, gamma=1.0)
    result = combination_search(params, 100_000, seed=0)
    assert result.max_margin > 0.0
    # The reported argmax is consistent with its margin.
    r = qm_r_factor(params, result.argmax)
    assert r - lrt_bound_exponential(params, result.argmax) == pytest.approx(result.max_margin)


def test_combination_search_single_sample():
    one = combination_search(B_PARAMS, 1, seed=5)
    two = combination_search(B_PARAMS, 1, seed=5)
    assert one.argmax == two.argmax
    with pytest.raises(ValueError):
        combination_search(B_PARAMS, 0, seed=5)
    with pytest.raises(ValueError):
        combination_search(B_PARAMS, 10, seed=5, t_range=(2.0, 1.0))


def test_bell_report_verdicts():
    report = bell_report(B_PARAMS, optimum_quadruple(B_PARAMS))
    assert report.verdict == "consistent_with_lrt"
    assert report.margin < 0 and report.qm_max == QM_MAX
    strong = MesonParams(label="x=20", delta_m=20.0, gamma=1.0)
    report = bell_report(strong, optimum_quadruple(strong))
    assert report.verdict == "violates_lrt"
    assert report.r_value == pytest.approx(QM_MAX, abs=1e-12)


def test_empirical_r_from_binned_events_matches_analytic():
    # Quadruple chosen so all four |t_i - t_j'| sit exactly on bin centers.
    g = B_PARAMS.gamma
    width = 0.1 / g
    q = TimeQuadruple(1.05 / g, 2.0 / g, 2.85 / g, 0.0)
    batch = generate_qm_events(B_PARAMS, 10**6, seed=22)
    hist = bin_delta(batch, width, 10.0 / g)
    ests = [estimate_correlation(hist.counts[hist.bin_of(dt)]) for dt in q.delta_ts()]
    r_emp = abs(ests[0].value + ests[1].value + ests[2].value - ests[3].value)
    r_true = qm_r_factor(B_PARAMS, q)
    combined = math.sqrt(sum(e.stderr**2 for e in ests))
    assert abs(r_emp - r_true) < 5 * combined
