"""Tests for energy functionals, Dini estimates, and certificate checks."""

import math

import numpy as np
import pytest

from delaystab import SpaceSpec, make_system
from delaystab.dde import segment_at, simulate
from delaystab.sampler import SamplerConfig, sample_one
from delaystab.segment import ParameterError, Segment, space_norm
from delaystab.lyapunov import (
    DiniEstimate,
    EscapeError,
    Functional,
    MonotoneGridFn,
    check_exponential_certificate,
    check_growth_certificate,
    check_pointwise_dissipation,
    dini_derivative,
    functional_from_json_dict,
    functional_lipschitz_probe,
    grid_fn_from_json_dict,
    quadratic_integral,
    rate_from_json_dict,
    scaled_abs_rate,
    scaled_square_rate,
    space_norm_functional,
    weighted_sup,
)

SUP = SpaceSpec.sup()


def linear(r, a, b):
    return make_system("linear_scalar", r, {"a": a, "b": b})


def ball_cfg(family="fourier", order=3, r=1.0, seed=0, norm=1.0):
    return SamplerConfig(family=family, order=order, target_space=SUP,
                         target_norm=norm, dimension=1, delay_r=r,
                         seed=seed, n_nodes=65)


# -- monotone grid functions -------------------------------------------


def test_grid_fn_linear_and_extrapolation():
    f = MonotoneGridFn.linear(2.0)
    assert f(0.5) == pytest.approx(1.0)
    assert f(3.0) == pytest.approx(6.0)
    # extrapolation keeps the end slope instead of clamping
    assert f(-1.0) == pytest.approx(-2.0)


def test_grid_fn_validation():
    with pytest.raises(ParameterError):
        MonotoneGridFn(np.array([0.0, 0.0]), np.array([0.0, 1.0]))
    with pytest.raises(ParameterError):
        MonotoneGridFn(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    with pytest.raises(ParameterError):
        MonotoneGridFn.linear(-1.0)
    # flat pieces block inversion
    flat = MonotoneGridFn(np.array([0.0, 1.0, 2.0]),
                          np.array([0.0, 1.0, 1.0]))
    with pytest.raises(ParameterError):
        flat.invert()


def test_grid_fn_inversion_roundtrip():
    rng = np.random.default_rng(7)
    xs = np.sort(rng.uniform(-2.0, 3.0, 9))
    xs += 1e-3 * np.arange(9)
    ys = np.cumsum(rng.uniform(0.1, 2.0, 9))
    f = MonotoneGridFn(xs, ys)
    inv = f.invert()
    probes = np.concatenate([xs, (xs[:-1] + xs[1:]) / 2,
                             [xs[0] - 1.0, xs[-1] + 1.5]])
    for s in probes:
        assert inv(f(s)) == pytest.approx(s, rel=1e-12, abs=1e-12)


def test_grid_fn_json():
    f = grid_fn_from_json_dict({"linear": 1.5})
    assert f(2.0) == pytest.approx(3.0)
    g = grid_fn_from_json_dict(f.to_json_dict())
    assert g(2.0) == pytest.approx(3.0)
    with pytest.raises(ParameterError):
        grid_fn_from_json_dict({"linear": 1.0, "xs": [0, 1]})


# -- functionals -------------------------------------------------------


def test_functionals_vanish_at_origin():
    z = Segment.zero(1.0, 1, 65)
    for V in (weighted_sup(1.0), quadratic_integral(0.5),
              space_norm_functional(SUP)):
        assert V.evaluate(z) == 0.0


def test_weighted_sup_homogeneous():
    x = sample_one(ball_cfg(), 2)
    V = weighted_sup(1.0)
    for c in (0.5, 2.0, 3.7):
        assert V.evaluate(x * c) == pytest.approx(c * V.evaluate(x),
                                                  rel=1e-12)


def test_quadratic_integral_scales_quadratically():
    x = sample_one(ball_cfg(), 2)
    V = quadratic_integral(0.5)
    for c in (0.5, 2.0, 3.7):
        assert V.evaluate(x * c) == pytest.approx(c * c * V.evaluate(x),
                                                  rel=1e-12)


def test_functional_json_round():
    V = functional_from_json_dict({"type": "weighted_sup", "lam": 1.0})
    x = sample_one(ball_cfg(), 0)
    assert V.evaluate(x) == pytest.approx(weighted_sup(1.0).evaluate(x))
    W = functional_from_json_dict({"type": "space_norm",
                                   "space": {"kind": "sup"}})
    assert W.evaluate(x) == pytest.approx(space_norm(x, SUP))
    with pytest.raises(ParameterError):
        functional_from_json_dict({"type": "weighted_sup"})
    with pytest.raises(ParameterError):
        functional_from_json_dict({"type": "mystery", "lam": 1.0})


def test_rate_builders():
    Q = scaled_abs_rate(2.0)
    assert Q(np.array([-3.0])) == pytest.approx(6.0)
    Q2 = scaled_square_rate(0.5)
    assert Q2(np.array([3.0, 4.0])) == pytest.approx(12.5)
    with pytest.raises(ParameterError):
        scaled_abs_rate(0.0)
    Qj = rate_from_json_dict({"type": "scaled_abs", "c": 1.0})
    assert Qj(np.array([2.0])) == pytest.approx(2.0)
    with pytest.raises(ParameterError):
        rate_from_json_dict({"type": "scaled_abs"})


def test_lipschitz_probe_bounds():
    # weighted sup is 1-Lipschitz against the plain sup norm
    C = functional_lipschitz_probe(weighted_sup(1.0), SUP, 1.0, 20, r=1.0,
                                   seed=3)
    assert C <= 1.0 + 1e-9
    # quadratic integral: |V(x)-V(y)| <= 2R(1+r) ||x-y|| on the R-ball
    Cq = functional_lipschitz_probe(quadratic_integral(0.0), SUP, 1.0, 20,
                                    r=1.0, seed=3)
    assert Cq <= 4.0


# -- Dini derivative ---------------------------------------------------


def test_dini_constant_history_decay():
    """x = c under pure decay: V(x_t) = e^(-t)|c|, so the quotient is -|c|."""
    sys = linear(1.0, -1.0, 0.0)
    V = weighted_sup(1.0)
    cfg = ball_cfg(family="polynomial", order=0)
    for i in range(3):
        x = sample_one(cfg, i)
        c = abs(float(x.values[-1][0]))
        d = dini_derivative(sys, V, x)
        assert d.estimate == pytest.approx(-c, rel=2e-2)
        assert not d.trend
        hs = [h for h, _ in d.quotients]
        assert len(hs) == 6 and hs[0] == pytest.approx(1e-2)


def test_dini_equilibrium_is_zero():
    sys = linear(1.0, -1.0, 0.0)
    d = dini_derivative(sys, weighted_sup(1.0), Segment.zero(1.0, 1, 65))
    assert d.estimate == 0.0


def test_dini_frozen_norm_on_constant_flow():
    # zero system keeps a constant history constant, so the norm never moves
    sys = linear(1.0, 0.0, 0.0)
    x = sample_one(ball_cfg(family="polynomial", order=0), 0)
    d = dini_derivative(sys, space_norm_functional(SUP), x)
    assert d.estimate == 0.0


def test_dini_escape_carries_time():
    sys = make_system("quadratic", 1.0, {"c": 1.0})
    big = Segment.constant(1.0, np.array([300.0]), 65)
    with pytest.raises(EscapeError) as exc:
        dini_derivative(sys, weighted_sup(1.0), big)
    assert 0.0 < exc.value.escape_time < 1e-2


def test_dini_validation():
    sys = linear(1.0, -1.0, 0.0)
    with pytest.raises(ParameterError):
        dini_derivative(sys, weighted_sup(1.0), Segment.zero(1.0, 1, 65),
                        rungs=2)
    with pytest.raises(ParameterError):
        DiniEstimate(((1e-2, 0.0), (1e-2, 0.0), (1e-3, 0.0)), 0.0, False)
    with pytest.raises(ParameterError):
        DiniEstimate(((1e-2, 0.0), (1e-3, 0.0), (1e-4, 0.0)), math.inf,
                     False)


# -- exponential certificate -------------------------------------------


def test_exponential_certificate_equality_on_constants():
    """Pure decay with the e^s-weighted sup: decay holds with equality."""
    sys = linear(1.0, -1.0, 0.0)
    rep = check_exponential_certificate(
        sys, weighted_sup(1.0), MonotoneGridFn.linear(math.exp(-1.0)),
        MonotoneGridFn.linear(1.0), SUP, 5, 3.0,
        family="polynomial", order=0, seed=0)
    assert rep.verdict == "consistent"
    assert 1.0 - 1e-9 <= rep.margins["worst_decay_ratio"] <= 1.0 + 1e-6
    assert rep.margins["worst_envelope_ratio"] <= 1.0 + 1e-6


def test_exponential_certificate_fourier_consistent():
    sys = linear(1.0, -1.0, 0.0)
    rep = check_exponential_certificate(
        sys, weighted_sup(1.0), MonotoneGridFn.linear(math.exp(-1.0)),
        MonotoneGridFn.linear(1.0), SUP, 5, 3.0, seed=0)
    assert rep.verdict == "consistent"
    assert rep.margins["worst_upper_ratio"] <= 1.0 + 1e-9


def test_exponential_certificate_scaled_breaks_upper():
    sys = linear(1.0, -1.0, 0.0)
    base = weighted_sup(1.0)
    doubled = Functional("doubled", lambda s: 2.0 * base.evaluate(s))
    rep = check_exponential_certificate(
        sys, doubled, MonotoneGridFn.linear(math.exp(-1.0)),
        MonotoneGridFn.linear(1.0), SUP, 5, 3.0, seed=0)
    assert rep.verdict == "falsified"
    assert rep.details["failed"] == "upper_sandwich"
    assert rep.witness["time"] == 0.0


def test_exponential_certificate_frozen_norm_fails_decay():
    # zero system: the norm is frozen, e^(-t)V < V at the first grid time
    sys = linear(1.0, 0.0, 0.0)
    idf = MonotoneGridFn.linear(1.0)
    rep = check_exponential_certificate(
        sys, space_norm_functional(SUP), idf, idf, SUP, 3, 2.0, seed=0)
    assert rep.verdict == "falsified"
    assert rep.details["failed"] == "decay"
    assert 0.0 < rep.witness["time"] <= 0.2


def test_exponential_certificate_escape():
    sys = make_system("quadratic", 1.0, {"c": 1.0})
    idf = MonotoneGridFn.linear(1.0)
    rep = check_exponential_certificate(
        sys, space_norm_functional(SUP), idf, idf, SUP, 1, 1.0,
        family="polynomial", order=0, seed=1, rho=3.0)
    assert rep.verdict == "falsified"
    assert rep.details["failed"] == "escape"
    assert rep.witness["norm"] == math.inf


# -- pointwise dissipation ---------------------------------------------


def test_dissipation_consistent():
    """Pure decay dissipates at rate e^(-r)|x(0)| against the weighted sup."""
    sys = linear(1.0, -1.0, 0.0)
    idf = MonotoneGridFn.linear(1.0)
    rep = check_pointwise_dissipation(
        sys, weighted_sup(1.0), idf, idf, scaled_abs_rate(math.exp(-1.0)),
        SUP, 5, integral_trajectories=5, seed=0)
    assert rep.verdict == "consistent"
    assert rep.margins["worst_dini_excess"] < 0.0
    assert rep.margins["worst_integral_excess"] < 0.0


def test_dissipation_unstable_falsified():
    sys = linear(1.0, 1.0, 0.0)
    idf = MonotoneGridFn.linear(1.0)
    rep = check_pointwise_dissipation(
        sys, weighted_sup(1.0), idf, idf, scaled_abs_rate(math.exp(-1.0)),
        SUP, 5, integral_trajectories=5, family="polynomial", order=0,
        seed=0)
    assert rep.verdict == "falsified"
    assert rep.details["failed"] == "dissipation"
    assert rep.witness is not None


def test_dissipation_sandwich_falsified():
    # a2 ten times too small cannot dominate V
    sys = linear(1.0, -1.0, 0.0)
    rep = check_pointwise_dissipation(
        sys, weighted_sup(1.0), MonotoneGridFn.linear(1.0),
        MonotoneGridFn.linear(0.1), scaled_abs_rate(1.0), SUP, 5,
        integral_trajectories=2, seed=0)
    assert rep.verdict == "falsified"
    assert rep.details["failed"] == "sandwich"


# -- growth certificate ------------------------------------------------


def test_growth_certificate_delay_feedback():
    """For dx = x(t-r), prolongation grows at most at rate e^r."""
    sys = linear(1.0, 0.0, 1.0)
    rep = check_growth_certificate(
        sys, weighted_sup(1.0), MonotoneGridFn.linear(math.exp(-1.0)),
        math.e, 10, T=2.0, seed=0)
    assert rep.verdict == "consistent"
    assert rep.margins["worst_quotient_excess"] < 0.0
    assert rep.margins["worst_trajectory_ratio"] <= 1.0 + 1e-3


def test_growth_certificate_zero_system():
    # f = 0: prolongation never increases the sup
    sys = linear(1.0, 0.0, 0.0)
    rep = check_growth_certificate(
        sys, space_norm_functional(SUP), MonotoneGridFn.linear(1.0), 0.0, 5,
        seed=0)
    assert rep.verdict == "consistent"
    assert rep.margins["worst_quotient_excess"] < 0.0
    assert rep.margins["worst_trajectory_ratio"] == pytest.approx(1.0,
                                                                  rel=1e-9)


def test_growth_certificate_unstable_falsified():
    sys = linear(1.0, 0.0, 1.0)
    rep = check_growth_certificate(
        sys, weighted_sup(1.0), MonotoneGridFn.linear(math.exp(-1.0)), 0.0,
        5, family="polynomial", order=0, seed=0)
    assert rep.verdict == "falsified"
    assert rep.details["failed"] == "prolongation"
    assert rep.margins["quotient"] > 0.0


def test_growth_certificate_coercivity_falsified():
    # requiring U >= 10|x(0)| overshoots the weighted sup on constants
    sys = linear(1.0, 0.0, 0.0)
    rep = check_growth_certificate(
        sys, weighted_sup(1.0), MonotoneGridFn.linear(10.0), 0.0, 5,
        family="polynomial", order=0, seed=0)
    assert rep.verdict == "falsified"
    assert rep.details["failed"] == "coercivity"


# -- cross-checks and continuity ---------------------------------------


def test_certificate_decay_implies_dissipative_dini():
    """When the decay certificate passes, Dini estimates sit below -0.95 V."""
    sys = linear(1.0, -1.0, 0.0)
    V = weighted_sup(1.0)
    rep = check_exponential_certificate(
        sys, V, MonotoneGridFn.linear(math.exp(-1.0)),
        MonotoneGridFn.linear(1.0), SUP, 5, 3.0, seed=0)
    assert rep.verdict == "consistent"
    cfg = ball_cfg()
    for i in range(5):
        x = sample_one(cfg, i)
        d = dini_derivative(sys, V, x)
        assert d.estimate <= -V.evaluate(x) * (1.0 - 0.05)


def _kinked_segment(r=1.0, n_nodes=65):
    def f(s):
        return np.where(s >= -r / 2, s + r / 2, 0.0)[:, None]

    def df(s):
        return np.where(s >= -r / 2, 1.0, 0.0)[:, None]

    return Segment.from_callable(r, f, df, n_nodes)


def _norm_jumps(traj, space, npts, r):
    ts = np.linspace(0.0, 1.2 * r, npts)
    vs = [space_norm(segment_at(traj, float(t), n_nodes=65), space)
          for t in ts]
    return float(np.abs(np.diff(vs)).max())


def test_norm_track_continuity_ladder():
    """t -> ||x_t|| jumps vanish under refinement for p = 2 but not p = inf.

    Under the zero system the window slides over a slope jump; the
    derivative sup drops by the jump height the instant the steep part
    leaves, while the L2 derivative norm drains continuously.
    """
    r = 1.0
    sys = linear(r, 0.0, 0.0)
    traj = simulate(sys, _kinked_segment(r), 1.2 * r, r / 100)
    sob2 = SpaceSpec.sobolev(2.0)
    coarse2 = _norm_jumps(traj, sob2, 25, r)
    fine2 = _norm_jumps(traj, sob2, 193, r)
    assert fine2 < 0.5 * coarse2
    assert fine2 < 0.06
    sobinf = SpaceSpec.sobolev(math.inf)
    assert _norm_jumps(traj, sobinf, 25, r) >= 0.9
    assert _norm_jumps(traj, sobinf, 193, r) >= 0.9
