import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from hwdshape.analysis import Link, ber_upper_bound
from hwdshape.constellation import (IDENTITY, apply_shaping, ShapingParams, distribution_power, entropy,
                                    make_constellation, shape_symbols)
from hwdshape.design import (AffineSurrogate, DesignError, NonConvergenceError, PSProblem,
                             design_gs, design_hs, design_ps, linearize_bound, solve_p1a,
                             write_result_json, write_trace_csv)
from hwdshape.design.gs import ZETA_MAX, default_starts
from hwdshape.noise import ChannelState, DistortionProfile

PROFILE = DistortionProfile()


def link_at(alpha, g=1.0):
    return Link.from_profile(PROFILE, ChannelState(g, alpha))


def slsqp_p1a(c, e, R, cap, x0):
    """Reference solve of the convex subproblem with a generic NLP solver."""

    def neg_entropy_bits(p):
        q = np.clip(p, 1e-300, None)
        return float(np.sum(p * np.log2(q)))

    cons = [dict(type="eq", fun=lambda p: p.sum() - 1.0),
            dict(type="ineq", fun=lambda p: cap - p @ e),
            dict(type="ineq", fun=lambda p: -neg_entropy_bits(p) - R)]
    r = minimize(lambda p: c @ p, x0, jac=lambda p: c, constraints=cons,
                 bounds=[(0, 1)] * c.size, method="SLSQP", options=dict(ftol=1e-14, maxiter=1000))
    return r.x


# ---------------------------------------------------------------- P1a

@pytest.mark.parametrize("seed", range(8))
def test_p1a_matches_generic_solver(seed):
    rng = np.random.default_rng(seed)
    c = make_constellation("QAM", 16)
    R = float(rng.uniform(2.0, 3.6))
    prob = PSProblem(c, R)
    grad = rng.normal(size=16)
    sur = AffineSurrogate(0.0, grad, np.full(16, 1 / 16))
    sol = solve_p1a(sur, prob)
    ref = slsqp_p1a(grad, c.energies, R, 1.0, np.full(16, 1 / 16))
    assert entropy(sol.p) >= R - 1e-9
    assert sol.p @ c.energies <= 1.0 + 1e-9
    assert sol.p.sum() == pytest.approx(1.0, abs=1e-12)
    # the generic solver is only accurate to ~1e-7; ours must be at least as good
    assert grad @ sol.p <= grad @ ref + 1e-6
    assert np.max(np.abs(sol.p - ref)) < 1e-3


@given(st.integers(0, 2 ** 31), st.floats(1.2, 2.9))
@settings(max_examples=40)
def test_p1a_kkt_conditions(seed, R):
    rng = np.random.default_rng(seed)
    c = make_constellation("QAM", 8)
    grad = rng.normal(size=8) * 10 ** rng.uniform(-3, 1)
    sol = solve_p1a(AffineSurrogate(0.0, grad, np.full(8, 1 / 8)), PSProblem(c, R))
    assert sol.kkt_residual < 1e-7
    assert sol.lam1 >= 0 and sol.lam3 >= 0
    assert entropy(sol.p) >= R - 1e-9
    assert distribution_power(c.with_priors(sol.p)) <= 1 + 1e-9
    assert np.all(sol.p >= 0)


def test_p1a_forced_uniform_when_rate_is_full():
    c = make_constellation("QAM", 8)
    sol = solve_p1a(AffineSurrogate(0.0, np.arange(8.0), np.full(8, 1 / 8)), PSProblem(c, 3.0))
    assert sol.degenerate
    assert np.allclose(sol.p, 1 / 8, atol=1e-12)
    assert math.isnan(sol.lam2) and math.isnan(sol.lam3)


def test_p1a_constant_gradient_gives_max_entropy_under_power():
    c = make_constellation("QAM", 16)
    sol = solve_p1a(AffineSurrogate(0.0, np.ones(16), np.full(16, 1 / 16)), PSProblem(c, 2.0))
    # any feasible point is optimal; the Gibbs branch returns one satisfying all constraints
    assert sol.kkt_residual < 1e-7
    assert entropy(sol.p) >= 2.0 - 1e-9


def test_problem_validation():
    c = make_constellation("QAM", 8)
    with pytest.raises(DesignError):
        PSProblem(c, 3.5)
    with pytest.raises(ValueError):
        PSProblem(c, 2.0, tolerance=0.0)
    assert PSProblem.for_orders(make_constellation("QAM", 32), 8).rate_floor == 3.0


def test_infeasible_power_cap():
    c = make_constellation("QAM", 16)
    with pytest.raises(DesignError):
        solve_p1a(AffineSurrogate(0.0, np.zeros(16), np.full(16, 1 / 16)), PSProblem(c, 3.9, power_cap=0.2))


# ---------------------------------------------------------------- surrogate

def test_linearization_remainder_is_second_order():
    c = make_constellation("QAM", 8)
    link = link_at(50.0)
    rng = np.random.default_rng(3)
    p0 = rng.dirichlet(np.ones(8) * 5)
    sur = linearize_bound(c, link, p0)
    d = rng.normal(size=8)
    d -= d.mean()
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        p = p0 + h * d
        errs.append(abs(ber_upper_bound(c.with_priors(p), link) - sur(p)))
    assert sur(p0) == pytest.approx(ber_upper_bound(c.with_priors(p0), link), rel=1e-14)
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(3.0 < r < 5.0 for r in ratios)


# ---------------------------------------------------------------- SCP

@pytest.mark.parametrize("M_u,M_nu,alpha", [(4, 8, 20.0), (8, 32, 100.0), (8, 16, 200.0), (16, 64, 1000.0)])
def test_design_ps_descends_and_is_feasible(M_u, M_nu, alpha):
    c = make_constellation("QAM", M_nu)
    prob = PSProblem.for_orders(c, M_u)
    r = design_ps(prob, link_at(alpha))
    assert r.converged
    assert np.all(np.diff(r.trace) <= 1e-15)
    assert r.bound_value <= r.trace[0]
    assert entropy(r.priors) >= math.log2(M_u) - 1e-9
    assert distribution_power(c.with_priors(r.priors)) <= 1 + 1e-9
    assert r.kkt_residual < 1e-6
    assert r.bound_value == pytest.approx(ber_upper_bound(c.with_priors(r.priors), link_at(alpha)), rel=1e-14)


def test_design_ps_full_rate_returns_uniform():
    c = make_constellation("QAM", 8)
    r = design_ps(PSProblem(c, 3.0), link_at(100.0))
    assert np.allclose(r.priors, 1 / 8)


def test_design_ps_eight_points_rate_two():
    # 8 points, rate 2: four points at 1/4, the rest vanish
    c = make_constellation("QAM", 8)
    r = design_ps(PSProblem(c, 2.0), link_at(200.0))
    p = np.sort(r.priors)
    assert np.allclose(p[4:], 0.25, atol=1e-6) and np.all(p[:4] < 1e-6)
    assert entropy(r.priors) == pytest.approx(2.0, abs=1e-6)


def test_design_ps_strict_nonconvergence():
    c = make_constellation("QAM", 32)
    prob = PSProblem(c, 3.0, max_iters=1)
    with pytest.raises(NonConvergenceError):
        design_ps(prob, link_at(100.0), strict=True)
    assert not design_ps(prob, link_at(100.0)).converged


def test_design_ps_rejects_infeasible_start():
    c = make_constellation("QAM", 8)
    with pytest.raises(DesignError):
        design_ps(PSProblem(c, 2.5), link_at(10.0), p_init=np.eye(8)[0])


def test_design_ps_under_shaping_uses_shaped_power():
    c = make_constellation("QAM", 16)
    s = ShapingParams(0.5, 0.3)
    r = design_ps(PSProblem(c, 3.0), link_at(100.0), shaping=s)
    e = np.abs(shape_symbols(c.symbols, s)) ** 2
    assert r.priors @ e <= 1 + 1e-9
    assert r.shaping == s


# ---------------------------------------------------------------- GS

def test_default_starts_grid():
    st_ = default_starts()
    assert len(st_) == 72
    assert {round(s.zeta, 6) for s in st_} == {round(0.1 * k, 6) for k in range(1, 10)}


@pytest.mark.parametrize("method", ["trust_region", "gradient_descent"])
@pytest.mark.parametrize("M,alpha", [(8, 100.0), (16, 300.0), (4, 30.0)])
def test_design_gs_improves_and_is_feasible(method, M, alpha):
    c = make_constellation("QAM", M)
    link = link_at(alpha, g=0.9 * np.exp(0.4j))
    r = design_gs(c, link, method=method)
    f0 = ber_upper_bound(c, link)
    assert r.bound_value <= f0
    assert 0 <= r.shaping.zeta <= ZETA_MAX
    assert distribution_power(apply_shaping(c.with_priors(r.priors), r.shaping)) <= 1 + 1e-9
    if M in (8, 16):
        assert r.bound_value < 0.9 * f0


def test_design_gs_proper_noise_keeps_identity():
    c = make_constellation("QAM", 16)
    link = Link.from_profile(DistortionProfile(0.0, 0.0), ChannelState(1.0, 30.0))
    r = design_gs(c, link)
    assert r.bound_value == pytest.approx(ber_upper_bound(c, link), rel=1e-9)


def test_design_gs_trust_region_not_worse_than_gradient_descent():
    c = make_constellation("QAM", 8)
    link = link_at(200.0)
    tr = design_gs(c, link, method="trust_region")
    gd = design_gs(c, link, method="gradient_descent")
    assert tr.bound_value <= gd.bound_value * (1 + 1e-3)


def test_design_gs_power_cap_with_skewed_priors():
    c = make_constellation("QAM", 8, layout="rectangular")
    p = np.array([0.05, 0.2, 0.2, 0.05, 0.05, 0.2, 0.2, 0.05])
    r = design_gs(c, link_at(100.0), p_fixed=p, power_cap=1.0)
    assert distribution_power(apply_shaping(c.with_priors(p), r.shaping)) <= 1.0 + 1e-9


def test_design_gs_rejects_unknown_method_and_bad_init():
    c = make_constellation("QAM", 8, layout="rectangular")
    with pytest.raises(ValueError):
        design_gs(c, link_at(10.0), method="newton")
    with pytest.raises(DesignError):
        design_gs(c, link_at(10.0), init=ShapingParams(0.9, 0.0))


# ---------------------------------------------------------------- HS

@pytest.mark.parametrize("alpha", [30.0, 200.0])
def test_hs_not_worse_than_either_stage(alpha):
    c = make_constellation("QAM", 32)
    prob = PSProblem.for_orders(c, 8)
    link = link_at(alpha)
    ps = design_ps(prob, link)
    gs = design_gs(c, link, p_fixed=np.full(32, 1 / 32))
    hs = design_hs(prob, link)
    assert hs.bound_value <= min(ps.bound_value, gs.bound_value) * (1 + 1e-12)
    assert entropy(hs.priors) >= 3 - 1e-9
    assert distribution_power(apply_shaping(c.with_priors(hs.priors), hs.shaping)) <= 1 + 1e-9
    assert hs.scheme in ("hs:ps_first", "hs:gs_first")


def test_hs_orders():
    c = make_constellation("QAM", 16)
    prob = PSProblem(c, 3.0)
    link = link_at(100.0)
    a = design_hs(prob, link, order="ps_first")
    b = design_hs(prob, link, order="gs_first")
    both = design_hs(prob, link)
    assert both.bound_value == min(a.bound_value, b.bound_value)
    assert np.all(np.diff(a.trace) <= 1e-15) and np.all(np.diff(b.trace) <= 1e-15)
    with pytest.raises(ValueError):
        design_hs(prob, link, order="random")


# ---------------------------------------------------------------- serialization

def test_result_serialization(tmp_path):
    c = make_constellation("QAM", 16)
    r = design_ps(PSProblem(c, 3.0), link_at(100.0))
    write_result_json(r, tmp_path / "r.json")
    write_trace_csv(r, tmp_path / "t.csv")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["scheme"] == "ps" and len(d["priors"]) == 16
    assert d["bound"] == r.bound_value
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "iter,bound,entropy,power,kkt_residual"
    assert len(lines) == len(r.records) + 1
    assert float(lines[-1].split(",")[1]) == r.bound_value
    assert r.shaping == IDENTITY
