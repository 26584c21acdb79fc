import inspect
import math

import numpy as np
import pytest

from mesonbell import (
    CellGridSpec,
    ConstantAnticorrelated,
    MesonParams,
    OscillatingSign,
    TimeGridSpec,
    TimePair,
    UnrestrictedDemoModel,
    check_homogeneity,
    check_marginal_factorization,
    chsh_cell,
    generate_lrt_events,
    generate_model_events,
    generate_qm_events,
    lrt_correlation_cell,
    lrt_correlation_delta,
    lrt_joint_probability,
    make_model,
)
from mesonbell.lrt import (
    InsufficientDataError,
    MODEL_REGISTRY,
    joint_probability_table,
    sign_pm,
)
from mesonbell.montecarlo import chunk_rng
from mesonbell.quadrature import QuadratureConvergenceError, QuadratureSpec

P = MesonParams(label="unit", delta_m=0.9, gamma=1.0)


def triangle(phase: float) -> float:
    """Exact cell correlation of the oscillating-sign model."""
    u = abs(phase) % (2.0 * math.pi)
    if u > math.pi:
        u = 2.0 * math.pi - u
    return -1.0 + 2.0 * u / math.pi


def osc_cell_oracle(params, t_l, t_r, n=400_001):
    """Brute-force average over a uniform phase grid, independent of the model code."""
    lam = (np.arange(n) + 0.5) * (2.0 * np.pi / n)
    a = np.where(np.cos(params.delta_m * t_l + lam) >= 0, 1, -1)
    b = -np.where(np.cos(params.delta_m * t_r + lam) >= 0, 1, -1)
    return float(np.mean(a * b))


def test_registry():
    assert set(MODEL_REGISTRY) == {"const-anti", "osc-sign", "demo-qm"}
    assert isinstance(make_model("const-anti", P), ConstantAnticorrelated)
    assert isinstance(make_model("osc-sign", P), OscillatingSign)
    assert isinstance(make_model("demo-qm", P), UnrestrictedDemoModel)
    with pytest.raises(ValueError, match="unknown model"):
        make_model("nonsense", P)


def test_outcome_signatures_are_one_sided():
    # Structural locality: each outcome function can only receive its own
    # side's decay time.
    for model in (ConstantAnticorrelated(P), OscillatingSign(P)):
        for fn in (model.outcome_a, model.outcome_b):
            assert list(inspect.signature(fn).parameters) == ["lam", "t"]


def test_sign_tiebreak():
    assert sign_pm(0.0) == 1
    assert (sign_pm(np.array([-0.5, 0.0, 0.5])) == np.array([-1, 1, 1])).all()


def test_cell_correlation_const_anti_exact():
    est = lrt_correlation_cell(ConstantAnticorrelated(P), TimePair(0.3, 4.0), 500,
                               np.random.default_rng(0))
    assert est.value == -1.0 and est.stderr == 0.0


def test_cell_correlation_osc_sign_against_grid_oracle():
    model = OscillatingSign(P)
    rng = np.random.default_rng(1)
    for phase, expected in ((0.0, -1.0), (math.pi / 2, 0.0), (math.pi / 4, -0.5)):
        t_l = phase / P.delta_m
        oracle = osc_cell_oracle(P, t_l, 0.0)
        assert abs(oracle - triangle(phase)) < 2e-5
        est = lrt_correlation_cell(model, TimePair(t_l, 0.0), 100_000, rng)
        se = max(est.stderr, 1e-12)
        assert abs(est.value - oracle) < 5 * se


def test_cell_correlation_requires_lambda_draws():
    with pytest.raises(ValueError):
        lrt_correlation_cell(OscillatingSign(P), TimePair(0.0, 0.0), 0,
                             np.random.default_rng(0))


def test_delta_correlation_const_anti():
    model = ConstantAnticorrelated(P)
    for dt in (0.0, 0.7, 3.0):
        est = lrt_correlation_delta(model, dt, 200, np.random.default_rng(2))
        assert est.value == pytest.approx(-1.0, abs=1e-12)


def test_delta_correlation_osc_sign():
    model = OscillatingSign(P)
    est = lrt_correlation_delta(model, 0.0, 2000, np.random.default_rng(3))
    assert est.value == pytest.approx(-1.0, abs=1e-12)
    # Time-independent integrand: the strip value equals the cell triangle.
    for phase in (math.pi / 4, math.pi / 2):
        est = lrt_correlation_delta(model, phase / P.delta_m, 4000, np.random.default_rng(4))
        assert abs(est.value - triangle(phase)) < 5 * max(est.stderr, 1e-12)
    with pytest.raises(ValueError):
        lrt_correlation_delta(model, -0.1, 100, np.random.default_rng(0))


def test_delta_correlation_demo_adapter():
    demo = UnrestrictedDemoModel(P)
    est = lrt_correlation_delta(demo, math.pi / P.delta_m, 200_000, np.random.default_rng(5))
    assert abs(est.value - 1.0) < 5 * max(est.stderr, 1e-5)


def test_delta_correlation_non_convergence_raises():
    spec = QuadratureSpec(cutoff=50.0 / P.gamma, rel_tol=1e-12, max_nodes=100)
    with pytest.raises(QuadratureConvergenceError):
        lrt_correlation_delta(OscillatingSign(P), 0.5, 50_000,
                              np.random.default_rng(6), quadrature_spec=spec)


def test_joint_probability_partition_is_exact():
    model = OscillatingSign(P)
    tp = TimePair(0.4, 1.7)
    table = joint_probability_table(model, tp, 5000, np.random.default_rng(7))
    assert sum(table.values()) == pytest.approx(float(model.eta(tp.t_l, tp.t_r)), rel=1e-14)
    assert all(v >= 0 for v in table.values())


def test_joint_probability_const_anti():
    model = ConstantAnticorrelated(P)
    tp = TimePair(0.2, 0.9)
    rng = np.random.default_rng(8)
    assert lrt_joint_probability(model, 1, 1, tp, 2000, rng) == 0.0
    assert lrt_joint_probability(model, -1, -1, tp, 2000, rng) == 0.0
    with pytest.raises(ValueError):
        lrt_joint_probability(model, 0, 1, tp, 10, rng)


def test_joint_probability_osc_sign_equal_times():
    # At dt = 0 the outcomes are perfectly anticorrelated, so each opposite
    # flavor pair carries half of eta.
    model = OscillatingSign(P)
    tp = TimePair(0.8, 0.8)
    table = joint_probability_table(model, tp, 200_000, np.random.default_rng(9))
    eta = float(model.eta(0.8, 0.8))
    assert table[(1, 1)] == 0.0 and table[(-1, -1)] == 0.0
    assert abs(table[(1, -1)] - eta / 2) < 5 * eta / math.sqrt(4 * 200_000)


def test_joint_probability_reproduces_cell_correlation():
    model = OscillatingSign(P)
    tp = TimePair(0.3, 1.2)
    table = joint_probability_table(model, tp, 50_000, np.random.default_rng(10))
    c_from_p = sum(i * j * v for (i, j), v in table.items()) / sum(table.values())
    est = lrt_correlation_cell(model, tp, 50_000, np.random.default_rng(11))
    combined = math.hypot(est.stderr, est.stderr) + 1e-12
    assert abs(c_from_p - est.value) < 5 * combined


def test_marginal_factorization():
    grid = TimeGridSpec(t_max=3.0 / P.gamma, n=25)
    report = check_marginal_factorization(OscillatingSign(P), grid)
    assert report.holds and report.max_deviation < 1e-12

    def eta_modulated(tl, tr):
        g = P.gamma
        return g * g * np.exp(-g * (tl + tr)) * (1 + np.cos(P.delta_m * (tl - tr))) / 2

    report = check_marginal_factorization(eta_modulated, grid)
    assert not report.holds and report.max_deviation > 1e-3

    def eta_const(tl, tr):
        return np.ones_like(np.asarray(tl, dtype=float))

    assert check_marginal_factorization(eta_const, grid).holds

    with pytest.raises(ValueError):
        TimeGridSpec(t_max=1.0, n=5, t_min=-0.2)
    with pytest.raises(ValueError):
        TimeGridSpec(t_max=1.0, n=1)


GRID = CellGridSpec(bin_width=0.8 / P.gamma, t_max=3.2 / P.gamma)


def test_homogeneity_passes_restricted_models():
    for name in ("const-anti", "osc-sign"):
        batch = generate_lrt_events(make_model(name, P), 200_000, seed=42)
        report = check_homogeneity(batch, GRID)
        assert report.consistent, (name, report)


def test_homogeneity_flags_demo_model():
    batch = generate_model_events(make_model("demo-qm", P), 200_000, seed=42)
    report = check_homogeneity(batch, GRID)
    assert not report.consistent
    assert report.statistic > 2 * report.threshold
    assert report.worst_rectangle is not None


def test_homogeneity_flags_qm_events():
    batch = generate_qm_events(P, 200_000, seed=42)
    assert not check_homogeneity(batch, GRID).consistent


def test_homogeneity_single_cell_grid_trivially_consistent():
    batch = generate_qm_events(P, 5_000, seed=1)
    report = check_homogeneity(batch, CellGridSpec(bin_width=5.0 / P.gamma, t_max=5.0 / P.gamma))
    assert report.consistent and report.statistic == 0.0
    assert report.n_rectangles == 0


def test_homogeneity_underoccupied_cells_error():
    batch = generate_qm_events(P, 300, seed=2)
    with pytest.raises(InsufficientDataError) as err:
        check_homogeneity(batch, GRID)
    assert err.value.cells  # offending cells are listed


def test_homogeneity_accepts_record_iterables():
    batch = generate_lrt_events(ConstantAnticorrelated(P), 60_000, seed=3)
    report = check_homogeneity(list(batch.records())[:50_000],
                               CellGridSpec(bin_width=1.0 / P.gamma, t_max=2.0 / P.gamma))
    assert report.consistent


def test_restricted_models_respect_cell_chsh():
    # |S| <= 2 + 3 * combined MC error for every sampled quadruple.
    rng = np.random.default_rng(12)
    n_lambda = 20_000
    for name in ("const-anti", "osc-sign"):
        model = make_model(name, P)
        for _ in range(20):
            a, ap, b, bp = rng.uniform(0.0, 6.0, size=4)
            draw = chunk_rng(seed=13, chunk_index=_)

            def corr(tp, draw=draw):
                return lrt_correlation_cell(model, tp, n_lambda, draw).value

            s = chsh_cell(corr, a, ap, b, bp)
            combined = 3.0 * math.sqrt(4.0 / n_lambda)
            assert s <= 2.0 + combined, (name, s)


def test_demo_model_reproduces_qm_correlation_on_grid():
    demo = UnrestrictedDemoModel(P)
    n = 10**6
    for k, phase in enumerate(np.linspace(0.0, 2.4 * math.pi, 20)):
        dt = phase / P.delta_m
        est = demo.delta_correlation(dt, n, chunk_rng(seed=14, chunk_index=k))
        se = max(est.stderr, 1e-6)
        assert abs(est.value - (-math.cos(phase))) < 5 * se
