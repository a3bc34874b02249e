import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfol.errors import (
    BadParams,
    BlowupDetected,
    InsufficientSamples,
    NotCompatible,
    NotConverged,
    NotPositive,
    PoleReached,
    SingularMetric,
)
from gfol.lie_model import abelian, heisenberg, para_model, quat_heisenberg, s_model, su2
from gfol.ricci_flow import (
    FlowConfig,
    ScalarOdeSpec,
    closed_form_mu,
    comparison_closed_form,
    convergence_report,
    default_t_end,
    evolution_residuals,
    flow_rhs,
    integrate_flow,
    integrate_scalar,
    interpolated_metric,
    limit_metric,
    partial_ricci_form,
    retract_and_verify,
    ric_eigenframe,
    ric_eigenvalues,
    ric_operator,
    scalar_case_i,
)
from gfol.tensor_geometry import theta_forms

from oracles import logistic_oracle, phase_line_oracle, ric_perp_loops, rk4_scalar


@pytest.fixture(scope="module")
def heis23_short():
    return integrate_flow(heisenberg(2, 3), FlowConfig(phi_const=1.0, t_end=-2.0, dt=2e-3, diagnostics_every=25))


# --- right-hand side -------------------------------------------------------------------------

def test_fixed_point_rhs_vanishes():
    m = heisenberg(1)
    np.testing.assert_allclose(flow_rhs(m.horizontal_metric, m, 1.0), 0.0, atol=1e-15)


def test_rhs_weak_heisenberg():
    m = heisenberg(2, 3)
    np.testing.assert_allclose(flow_rhs(m.horizontal_metric, m, 1.0), np.diag([-6.0, -6, -16, -16]), atol=1e-13)


def test_rhs_without_brackets_is_pure_scaling():
    m = abelian(4, vertical=(3,))
    G = np.diag([1.0, 2.0, 3.0])
    np.testing.assert_allclose(flow_rhs(G, m, 1.0), 2 * G)


def test_rhs_singular_metric():
    m = heisenberg(1)
    with pytest.raises(SingularMetric):
        flow_rhs(np.diag([1.0, 1e-14]), m, 1.0)
    with pytest.raises(SingularMetric):
        flow_rhs(np.array([[np.nan, 0], [0, 1.0]]), m, 1.0)


@pytest.mark.parametrize("model", [heisenberg(2, 3), quat_heisenberg(2), s_model(2, 2, 1.5)], ids=lambda m: m.name)
def test_algebraic_ric_matches_curvature_oracle(model):
    rng = np.random.default_rng(1)
    k = len(model.horizontal)
    B = rng.standard_normal((k, k))
    G = B @ B.T + k * np.eye(k)
    mg = model.with_horizontal_metric(G)
    np.testing.assert_allclose(ric_operator(theta_forms(mg), G), ric_perp_loops(mg), atol=1e-10)


def test_ric_eigenvalues_indefinite_metric():
    m = para_model(1, 1)
    np.testing.assert_allclose(ric_eigenvalues(theta_forms(m), m.horizontal_metric), [-1.0, -1.0], atol=1e-12)


def test_partial_ricci_form_symmetric():
    m = quat_heisenberg(2)
    r = partial_ricci_form(theta_forms(m), m.horizontal_metric)
    np.testing.assert_array_equal(r, r.T)


# --- evolution laws -------------------------------------------------------------------------------

@pytest.mark.parametrize("model, phi", [(heisenberg(2, 3), 1.0), (quat_heisenberg(2), 3.0), (s_model(1, 3, 2.0), 0.7)],
                         ids=["heis23", "quat2", "s132"])
def test_evolution_residuals_small(model, phi):
    res = evolution_residuals(model, model.horizontal_metric, phi)
    assert res["ric_ode"] <= 1e-6 * 100  # derivative scale is O(100) here
    assert res["tsharp_ode"] <= 1e-6 * 10
    assert res["commutator"] <= 1e-10
    assert res["a_vanishing"] <= 1e-12
    assert res["compat"] <= 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_evolution_laws_random_metrics(seed):
    rng = np.random.default_rng(seed)
    m = heisenberg(1, 1)
    B = rng.standard_normal((4, 4))
    G = B @ B.T + 2 * np.eye(4)
    res = evolution_residuals(m, G, float(rng.uniform(0.5, 2.0)))
    assert res["ric_ode"] <= 1e-6
    assert res["tsharp_ode"] <= 1e-6


# --- integration --------------------------------------------------------------------------------------

def test_fixed_point_trajectory():
    traj = integrate_flow(heisenberg(1), FlowConfig(phi_const=1.0, t_end=-1.0, dt=1e-2))
    for s in traj.samples:
        np.testing.assert_allclose(s.G, np.eye(2), atol=1e-14)
    assert traj.converged


def test_weak_heisenberg_trajectory(heis23_short):
    traj = heis23_short
    assert traj.final.t == pytest.approx(-2.0)
    # each eigenvalue follows the closed form independently
    for s in traj.samples[::50]:
        np.testing.assert_allclose(s.ric_eigs, [closed_form_mu(4, 1, s.t)] * 2 + [closed_form_mu(9, 1, s.t)] * 2,
                                   rtol=1e-7)  # RK4 truncation at dt = 2e-3
    assert traj.max_residual("ric_ode") <= 1e-6
    assert traj.max_residual("commutator") <= 1e-10


def test_metric_matches_interpolation_formula(heis23_short):
    m = heisenberg(2, 3)
    for s in heis23_short.samples[::100]:
        np.testing.assert_allclose(s.G, interpolated_metric(m, 1.0, s.t), atol=1e-8)


def test_vertical_block_constant(heis23_short):
    for s in heis23_short.samples[::100]:
        full = heis23_short.model_at(s).metric
        assert full[4, 4] == 1.0
        assert not full[4, :4].any()


def test_eigenframe_projectors_preserved():
    # non-diagonal start: eigenspaces of Ric_perp(0) stay invariant along the flow
    m = heisenberg(1, 2)
    P = np.eye(4) + 0.3 * np.array([[0, 1, 0, 1], [0, 0, 1, 0], [1, 0, 0, 0], [0, 0, 1, 0]])
    G0 = P.T @ P
    m = m.with_horizontal_metric(G0)
    traj = integrate_flow(m, FlowConfig(phi_const=1.0, t_end=-1.0, dt=5e-3, diagnostics=False))
    mu, V = ric_eigenframe(m)
    Vinv = np.linalg.inv(V)
    thetas = theta_forms(m)
    projs = [V @ np.diag(np.isclose(mu, val).astype(float)) @ Vinv for val in np.unique(np.round(mu, 8))]
    assert len(projs) == 2
    for s in traj.samples[::40]:
        ric = ric_operator(thetas, s.G)
        for proj in projs:
            np.testing.assert_allclose(ric @ proj, proj @ ric, atol=1e-9)


def test_positive_t_end_hits_pole():
    with pytest.raises(PoleReached):
        integrate_flow(heisenberg(2, 3), FlowConfig(phi_const=1.0, t_end=1.0))


def test_positive_t_end_before_pole():
    traj = integrate_flow(heisenberg(2, 3), FlowConfig(phi_const=1.0, t_end=0.01, dt=1e-3, diagnostics=False))
    assert traj.final.t == pytest.approx(0.01)
    assert traj.final.ric_eigs[0] == pytest.approx(closed_form_mu(4, 1, 0.01), rel=1e-10)


def test_para_not_positive():
    with pytest.raises(NotPositive):
        integrate_flow(para_model(1, 1), FlowConfig())


def test_abelian_not_positive():
    with pytest.raises(NotPositive):
        integrate_flow(abelian(3), FlowConfig())


def test_incompatible_model_rejected():
    with pytest.raises(NotCompatible):
        integrate_flow(su2().with_metric(np.diag([1.0, 2.0, 1.0])), FlowConfig())


@pytest.mark.parametrize("kwargs", [
    {"phi_const": 0.0}, {"phi_const": -1.0}, {"t_end": 0.0}, {"t_end": math.inf}, {"dt": 0.0},
    {"dt": 0.1}, {"tol": 0.0}, {"record_every": 0}, {"diagnostics_every": 0},
])
def test_config_validation(kwargs):
    with pytest.raises(BadParams):
        FlowConfig(**kwargs)


def test_config_defaults():
    assert FlowConfig().t_end == -3.0
    assert FlowConfig(phi_const=0.25).t_end == -6.0
    assert default_t_end(0.1) == pytest.approx(-15.0)
    cfg = FlowConfig(t_end=-1.0, dt=3e-3)
    assert cfg.n_steps * abs(cfg.step) == pytest.approx(1.0)


def test_record_every():
    traj = integrate_flow(heisenberg(1), FlowConfig(t_end=-0.1, dt=1e-3, record_every=10, diagnostics=False))
    assert len(traj.samples) == 11
    assert traj.samples[0].residuals == {}


# --- closed forms -------------------------------------------------------------------------------------

@pytest.mark.parametrize("mu0, P, t", [(4, 1, -0.5), (9, 1, -2.0), (0.5, 2, -1.0), (3, 3, -0.1), (1, 1, -7.0)])
def test_closed_form_matches_separation_of_variables(mu0, P, t):
    assert closed_form_mu(mu0, P, t) == pytest.approx(logistic_oracle(mu0, P, t), rel=1e-12)


def test_closed_form_reference_values():
    assert closed_form_mu(4, 1, -0.5) == pytest.approx(1.11296786604, abs=1e-10)
    assert closed_form_mu(5, 5, -1.0) == 5.0
    assert closed_form_mu(4, 1, 0.0) == 4.0


def test_closed_form_errors():
    with pytest.raises(BadParams):
        closed_form_mu(0.0, 1.0, -1.0)
    with pytest.raises(BadParams):
        closed_form_mu(1.0, -1.0, -1.0)
    with pytest.raises(PoleReached):
        closed_form_mu(4.0, 1.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 20), st.floats(0.1, 5), st.floats(-5, 0))
def test_closed_form_solves_ode(mu0, P, t):
    mu = closed_form_mu(mu0, P, t)
    d = 1e-6
    deriv = (closed_form_mu(mu0, P, t + d) - closed_form_mu(mu0, P, t - d)) / (2 * d)
    assert deriv == pytest.approx(4 * mu * (mu - P), rel=1e-5, abs=1e-6)
    # stays between mu0 and P going backward
    assert min(mu0, P) - 1e-12 <= mu <= max(mu0, P) + 1e-12


def test_comparison_reduces_at_zero_alpha():
    for t in (-0.3, -1.0, -2.5):
        assert comparison_closed_form(4, 0.0, 1.0, t) == pytest.approx(closed_form_mu(4, 2.0, t / 2), rel=1e-13)


@pytest.mark.parametrize("mu0, alpha, phi", [(1.0, 0.0, 1.0), (4.0, 0.5, 1.0), (0.3, -1.0, 2.0)])
def test_comparison_against_rk4(mu0, alpha, phi):
    f = lambda mu: 2 * mu * (mu + alpha - 2 * phi)
    exact = comparison_closed_form(mu0, alpha, phi, -1.0)
    assert exact == pytest.approx(rk4_scalar(f, mu0, -1.0, 1e-3), abs=1e-8)


def test_comparison_reference_value():
    # 2 / (1 + exp(-4)) for mu0 = 1, Phi = 1, alpha = 0, t = -1
    assert comparison_closed_form(1, 0.0, 1.0, -1.0) == pytest.approx(2 / (1 + math.exp(-4)), rel=1e-14)
    assert comparison_closed_form(1, 0.0, 1.0, -1.0) == pytest.approx(1.96402758, abs=1e-8)


def test_comparison_errors():
    with pytest.raises(BadParams):
        comparison_closed_form(1.0, 3.0, 1.0, -1.0)
    with pytest.raises(BadParams):
        comparison_closed_form(-1.0, 0.0, 1.0, -1.0)
    with pytest.raises(PoleReached):
        comparison_closed_form(4.0, 0.0, 1.0, 2.0)


# --- scalar ODE ------------------------------------------------------------------------------------------------

def test_reference_scalar_case():
    res = scalar_case_i(ScalarOdeSpec(psi1=0.0, psi2=4.0, mu0=3.0), t_end=-3.0)
    assert res.final == pytest.approx(1.0, abs=1e-8)


def test_stationary_points_are_roots():
    for psi1, psi2 in [(0.0, 4.0), (-1.0, 0.0), (0.5, 3.0), (2.0, 0.1)]:
        spec = ScalarOdeSpec(psi1=psi1, psi2=psi2)
        for mu in spec.stationary:
            assert abs(spec.rhs(mu)) <= 1e-12


def test_stationary_points():
    assert ScalarOdeSpec(psi1=0, psi2=4).stationary == (1.0, -1.0)
    mp, mm = ScalarOdeSpec(psi1=-1, psi2=0).stationary
    assert (mp, mm) == (1.0, 0.0)


@pytest.mark.parametrize("psi1, psi2, mu0", [(0.0, 4.0, 2.0), (-1.0, 0.0, 4.0), (0.5, 3.0, 0.3), (1.0, 8.0, 5.0)])
def test_scalar_case_i_approaches_upper_point(psi1, psi2, mu0):
    spec = ScalarOdeSpec(psi1=psi1, psi2=psi2, mu0=mu0)
    res = scalar_case_i(spec, t_end=-5.0)
    assert res.final == pytest.approx(res.mu_plus, abs=1e-6)
    for t, mu in zip(res.t[::500], res.mu[::500]):
        assert mu == pytest.approx(phase_line_oracle(psi1, psi2, mu0, t), rel=1e-9, abs=1e-12)


def test_scalar_spec_validation():
    with pytest.raises(BadParams):
        ScalarOdeSpec(psi1=0, psi2=-1)
    with pytest.raises(BadParams):
        scalar_case_i(ScalarOdeSpec(psi1=0, psi2=1), t_end=1.0)


def test_scalar_blowup_forward():
    with pytest.raises(BlowupDetected):
        integrate_scalar(lambda mu: 4 * mu * mu, 1.0, 1.0, 1e-3)


# --- limits ----------------------------------------------------------------------------------------------------

def test_limit_metric_weak_heisenberg():
    np.testing.assert_allclose(limit_metric(heisenberg(2, 3), 1.0), np.diag([2.0, 2, 3, 3]), atol=1e-14)


@pytest.mark.parametrize("model, phi", [(heisenberg(2, 3), 1.0), (heisenberg(0.5, 2), 2.0), (quat_heisenberg(2), 3.0),
                                        (s_model(1, 2, 3.0), 2.0)], ids=["h23", "h052", "q2", "s123"])
def test_limit_metric_is_einstein_like(model, phi):
    Ghat = limit_metric(model, phi)
    ric = ric_operator(theta_forms(model), Ghat)
    np.testing.assert_allclose(ric, phi * np.eye(ric.shape[0]), atol=1e-12)


def test_limit_metric_non_diagonal_start():
    m = heisenberg(1, 2)
    B = np.eye(4) + 0.2 * np.triu(np.ones((4, 4)), 1)
    m = m.with_horizontal_metric(B.T @ B)
    Ghat = limit_metric(m, 1.5)
    np.testing.assert_allclose(ric_operator(theta_forms(m), Ghat), 1.5 * np.eye(4), atol=1e-12)


def test_limit_metric_errors():
    with pytest.raises(NotPositive):
        limit_metric(para_model(1, 1), 1.0)
    with pytest.raises(NotPositive):
        limit_metric(abelian(3), 1.0)
    with pytest.raises(BadParams):
        limit_metric(heisenberg(1), 0.0)


def test_interpolation_endpoints():
    m = heisenberg(2, 3)
    np.testing.assert_allclose(interpolated_metric(m, 1.0, 0.0), m.horizontal_metric, atol=1e-14)
    np.testing.assert_allclose(interpolated_metric(m, 1.0, -30.0), limit_metric(m, 1.0), atol=1e-10)


# --- convergence and retraction ------------------------------------------------------------------------------

def test_convergence_report_rate(heis23_short):
    rep = convergence_report(heis23_short, 1.0)
    assert rep["rate"] == pytest.approx(4.0, rel=1e-2)
    assert rep["samples"] >= 10


def test_convergence_report_insufficient():
    traj = integrate_flow(heisenberg(1), FlowConfig(t_end=-0.5, dt=1e-2, diagnostics=False))
    with pytest.raises(InsufficientSamples):
        convergence_report(traj, 1.0)
    assert traj.rate_estimate is None


def test_retraction_s_model():
    m = s_model(1, 2, 3.0)
    cfg = FlowConfig(phi_const=2.0, t_end=-3.0, dt=1e-3, diagnostics=False)
    rep = retract_and_verify(m, cfg)
    # the starting structure is weak (Q = 9 id on D); after the flow it is classical
    from gfol.weak_structures import classify, induced_structure
    assert classify(induced_structure(m), m).label == "weak almost 𝒮"
    assert rep.classification_end.classical
    assert rep.classical
    assert rep.classification_limit.classical
    assert rep.q_deviation <= 1e-10
    json.dumps(rep.to_json())


def test_retraction_requires_convergence():
    cfg = FlowConfig(phi_const=1.0, t_end=-0.2, dt=1e-3, diagnostics=False)
    with pytest.raises(NotConverged):
        retract_and_verify(heisenberg(2, 3), cfg)


# --- serialization -------------------------------------------------------------------------------------------

def test_csv_and_json_formats(heis23_short):
    text = heis23_short.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["t", "mu_1", "mu_2", "mu_3", "mu_4", "res_ode", "res_tsharp", "res_commutator", "res_compat"]
    assert len(rows) == len(heis23_short.samples) + 1
    assert float(rows[1][0]) == 0.0
    assert rows[1][5] != "" and rows[2][5] == ""  # diagnostics only every 25 samples
    doc = json.loads(json.dumps(heis23_short.to_json()))
    assert doc["model"] == heis23_short.model.name
    assert len(doc["samples"][0]["G"]) == 16
    assert set(doc["samples"][0]["residuals"]) >= {"ric_ode", "tsharp_ode", "commutator", "compat"}
