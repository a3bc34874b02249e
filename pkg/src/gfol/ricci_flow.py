"""Normalized partial Ricci flow on Lie-algebra foliation models.

On a model the brackets are fixed, so the forms ``Theta_i`` are constant and
``T#_i`` and ``Ric_perp = -sum T#_i^2`` are algebraic in the horizontal metric
``G``.  The flow ``dG/dt = -2 r_G + 2 Phi G`` is therefore an ODE in ``G``
alone, integrated with fixed-step RK4 backward in time.  The evolution laws
of ``Ric_perp`` and ``T#`` are kept as independent residual checks.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadParams,
    BlowupDetected,
    InsufficientSamples,
    NotCompatible,
    NotConverged,
    NotPositive,
    PoleReached,
    PositivityLost,
    SingularMetric,
)
from .lie_model import LieFoliationModel, check_compatible
from .tensor_geometry import (
    curvature,
    foliation_tensors,
    levi_civita,
    ric_commutator_residual,
    sectional_curvature,
    theta_forms,
    tsharp_from_brackets,
)

MAX_DT = 1e-2
COND_LIMIT = 1e12
IMAG_TOL = 1e-9


def default_t_end(phi_const: float) -> float:
    return -max(3.0, 6.0 / (4.0 * phi_const))


@dataclass(frozen=True)
class FlowConfig:
    """Integration settings.

    ``t_end`` defaults to ``-max(3, 6/(4 Phi))``.  Positive ``t_end`` runs the
    flow forward in time, guarded by the closed-form pole time.
    ``diagnostics`` toggles the per-sample residuals (a)-(d); they need a
    connection and curvature evaluation per recorded sample.
    """

    phi_const: float = 1.0
    t_end: float | None = None
    dt: float = 1e-3
    tol: float = 1e-8
    record_every: int = 1
    diagnostics: bool = True
    diagnostics_every: int = 1
    kind: str | None = None

    def __post_init__(self):
        if not (self.phi_const > 0 and math.isfinite(self.phi_const)):
            raise BadParams(f"phi_const must be positive, got {self.phi_const}")
        if self.t_end is None:
            object.__setattr__(self, "t_end", default_t_end(self.phi_const))
        if not math.isfinite(self.t_end) or self.t_end == 0:
            raise BadParams("t_end must be a nonzero finite time")
        if not (0 < self.dt <= MAX_DT):
            raise BadParams(f"dt must lie in (0, {MAX_DT}], got {self.dt}")
        if self.tol <= 0:
            raise BadParams("tol must be positive")
        if int(self.record_every) < 1 or int(self.diagnostics_every) < 1:
            raise BadParams("record_every and diagnostics_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(abs(self.t_end) / self.dt)))

    @property
    def step(self) -> float:
        """Signed step in t (negative for backward runs)."""
        return self.t_end / self.n_steps


@dataclass
class FlowSample:
    t: float
    G: np.ndarray
    ric_eigs: list
    tsharp_norms: list
    residuals: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "G": [float(x) for x in self.G.ravel()],
            "ric_eigs": [float(x) for x in self.ric_eigs],
            "tsharp_norms": [float(x) for x in self.tsharp_norms],
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }


CSV_RESIDUALS = (("res_ode", "ric_ode"), ("res_tsharp", "tsharp_ode"),
                 ("res_commutator", "commutator"), ("res_compat", "compat"))


@dataclass
class FlowTrajectory:
    model: LieFoliationModel
    config: FlowConfig
    samples: list
    converged: bool
    rate_estimate: float | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def eigs(self) -> np.ndarray:
        return np.array([s.ric_eigs for s in self.samples])

    @property
    def final(self) -> FlowSample:
        return self.samples[-1]

    def model_at(self, sample: FlowSample | None = None) -> LieFoliationModel:
        return self.model.with_horizontal_metric((sample or self.final).G)

    def max_residual(self, name: str) -> float:
        vals = [s.residuals[name] for s in self.samples if name in s.residuals]
        return max(vals) if vals else 0.0

    def to_json(self) -> dict:
        return {
            "model": self.model.name,
            "phi": self.config.phi_const,
            "dt": self.config.dt,
            "samples": [s.to_json() for s in self.samples],
            "converged": bool(self.converged),
            "rate_estimate": self.rate_estimate,
        }

    def to_csv(self, fmt="{:.12g}") -> str:
        k = len(self.samples[0].ric_eigs) if self.samples else 0
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"mu_{i + 1}" for i in range(k)] + [c for c, _ in CSV_RESIDUALS])
        for s in self.samples:
            res = [fmt.format(s.residuals[key]) if key in s.residuals else "" for _, key in CSV_RESIDUALS]
            w.writerow([fmt.format(s.t)] + [fmt.format(m) for m in s.ric_eigs] + res)
        return buf.getvalue()


# --- algebraic pieces ------------------------------------------------------------

def _check_metric(G: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(G)):
        raise SingularMetric("metric has non-finite entries")
    if G.size and np.linalg.cond(G) > COND_LIMIT:
        raise SingularMetric(f"horizontal metric is numerically singular (cond {np.linalg.cond(G):.3e})")
    return G


def partial_ricci_form(thetas, G: np.ndarray) -> np.ndarray:
    """``r_G = -sum_i Theta_i G^{-1} Theta_i`` (symmetric bilinear form on D)."""
    Ginv = np.linalg.inv(G)
    r = -sum((th @ Ginv @ th for th in thetas), np.zeros_like(G))
    return 0.5 * (r + r.T)


def ric_operator(thetas, G: np.ndarray) -> np.ndarray:
    return np.linalg.solve(G, partial_ricci_form(thetas, G))


def flow_rhs(G, model: LieFoliationModel, phi_const: float, thetas=None, check: bool = True) -> np.ndarray:
    """``dG/dt = -2 r_G + 2 Phi G`` on the horizontal block."""
    G = np.asarray(G, dtype=float)
    if check:
        _check_metric(G)
    thetas = theta_forms(model) if thetas is None else thetas
    return -2.0 * partial_ricci_form(thetas, G) + 2.0 * phi_const * G


def ric_eigenvalues(thetas, G: np.ndarray) -> np.ndarray:
    """Sorted spectrum of ``Ric_perp``; must be real."""
    r = partial_ricci_form(thetas, G)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        w = np.linalg.eigvals(np.linalg.solve(G, r))
        if np.max(np.abs(w.imag), initial=0.0) > IMAG_TOL * max(1.0, np.max(np.abs(w), initial=0.0)):
            raise NotPositive("Ric_perp has non-real spectrum")
        return np.sort(w.real)
    Linv = np.linalg.inv(L)
    return np.sort(np.linalg.eigvalsh(Linv @ r @ Linv.T))


def rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _directional(fn, G, dG):
    """Five-point central difference of ``fn`` at ``G`` along ``dG``."""
    scale = max(1.0, float(np.max(np.abs(np.linalg.solve(G, dG)))))
    eps = 1e-3 / scale
    return (-fn(G + 2 * eps * dG) + 8 * fn(G + eps * dG) - 8 * fn(G - eps * dG) + fn(G - 2 * eps * dG)) / (12 * eps)


def evolution_residuals(model: LieFoliationModel, G: np.ndarray, phi_const: float, thetas=None) -> dict:
    """Residuals of the Ric_perp and T# evolution laws and of the connection identities at ``G``."""
    thetas = theta_forms(model) if thetas is None else thetas
    dG = flow_rhs(G, model, phi_const, thetas, check=False)
    ident = np.eye(G.shape[0])

    def tsh(M):
        return np.concatenate([np.linalg.solve(M, th) for th in thetas])

    ric = ric_operator(thetas, G)
    ts = [np.linalg.solve(G, th) for th in thetas]
    d_ric = _directional(lambda M: ric_operator(thetas, M), G, dG)
    law_ric = 2 * ric @ (ric - 2 * phi_const * ident) - 2 * sum(t @ ric @ t for t in ts)
    d_ts = _directional(tsh, G, dG)
    law_ts = np.concatenate([2 * (ric - phi_const * ident) @ t for t in ts])
    mt = model.with_horizontal_metric(G)
    gamma = levi_civita(mt)
    ft = foliation_tensors(mt, gamma)
    comp = check_compatible(mt, gamma, ft)
    return {
        "ric_ode": float(np.max(np.abs(d_ric - law_ric))),
        "tsharp_ode": float(np.max(np.abs(d_ts - law_ts))),
        "commutator": ric_commutator_residual(mt, gamma, ric, ft),
        "a_vanishing": max((float(np.max(np.abs(a))) for a in ft.A), default=0.0),
        "compat": max(comp.totally_geodesic, comp.riemannian),
    }


def _pole_time(mu0: float, phi_const: float) -> float:
    return math.log(mu0 / (mu0 - phi_const)) / (4.0 * phi_const)


def integrate_flow(model: LieFoliationModel, cfg: FlowConfig) -> FlowTrajectory:
    """RK4 integration of the normalized flow from ``t = 0`` to ``cfg.t_end``."""
    comp = check_compatible(model)
    if not comp.ok:
        raise NotCompatible(
            f"model is not compatible (totally_geodesic {comp.totally_geodesic:.3e}, "
            f"riemannian {comp.riemannian:.3e})")
    thetas = theta_forms(model)
    G = _check_metric(model.horizontal_metric.copy())
    eigs = ric_eigenvalues(thetas, G)
    if eigs.size == 0 or eigs[0] <= 0:
        raise NotPositive(f"Ric_perp(0) is not positive definite (min eigenvalue {eigs.min(initial=0.0):.6g})")
    phi_const = cfg.phi_const
    if cfg.t_end > 0:
        poles = [_pole_time(m, phi_const) for m in eigs if m > phi_const]
        if poles and min(poles) <= cfg.t_end:
            raise PoleReached(f"closed-form solution blows up at t = {min(poles):.6g} <= t_end")

    def rhs(M):
        return flow_rhs(M, model, phi_const, thetas, check=False)

    def sample(t, M, index):
        e = ric_eigenvalues(thetas, M)
        norms = [float(np.linalg.norm(np.linalg.solve(M, th))) for th in thetas]
        wanted = cfg.diagnostics and index % cfg.diagnostics_every == 0
        res = evolution_residuals(model, M, phi_const, thetas) if wanted else {}
        return FlowSample(float(t), M.copy(), [float(x) for x in e], norms, res)

    h = cfg.step
    samples = [sample(0.0, G, 0)]
    for n in range(1, cfg.n_steps + 1):
        G = rk4_step(rhs, G, h)
        G = 0.5 * (G + G.T)
        _check_metric(G)
        t = n * h
        eigs = ric_eigenvalues(thetas, G)
        if eigs[0] <= 0:
            raise PositivityLost(f"Ric_perp eigenvalue {eigs[0]:.6g} <= 0 at t = {t:.6g}")
        if n % cfg.record_every == 0 or n == cfg.n_steps:
            samples.append(sample(t, G, len(samples)))
    final = np.array(samples[-1].ric_eigs)
    converged = bool(np.max(np.abs(final - phi_const)) <= cfg.tol)
    traj = FlowTrajectory(model, cfg, samples, converged)
    try:
        traj.rate_estimate = convergence_report(traj, phi_const)["rate"]
    except InsufficientSamples:
        traj.rate_estimate = None
    return traj


def ric_deviation(sample: FlowSample, phi_const: float, model: LieFoliationModel) -> float:
    """``|Ric_perp - Phi id|_inf`` at a sample, as an operator in the model frame."""
    ric = ric_operator(theta_forms(model), sample.G)
    return float(np.max(np.abs(ric - phi_const * np.eye(ric.shape[0]))))


# --- closed forms ----------------------------------------------------------------------

def closed_form_mu(mu0: float, p_or_phi: float, t: float) -> float:
    """``mu(t) = mu0 P / (mu0 + exp(4 P t)(P - mu0))``, solving ``mu' = 4 mu (mu - P)``."""
    if mu0 <= 0 or p_or_phi <= 0:
        raise BadParams("mu0 and p/Phi must be positive")
    den = mu0 + math.exp(4.0 * p_or_phi * t) * (p_or_phi - mu0)
    if den <= 0:
        raise PoleReached(f"t = {t} is at or beyond the blow-up time")
    return mu0 * p_or_phi / den


def comparison_closed_form(mu0: float, alpha: float, phi_const: float, t: float) -> float:
    """Solution of ``mu' = 2 mu (mu + alpha - 2 Phi)``.

    With ``L = 2 Phi - alpha`` this is ``mu0 L / (mu0 + exp(2 L t)(L - mu0))``;
    for ``alpha = 0`` the exponent is ``4 Phi t``.
    """
    L = 2.0 * phi_const - alpha
    if L <= 0 or phi_const <= 0:
        raise BadParams("need 2 Phi > alpha and Phi > 0")
    if mu0 <= 0:
        raise BadParams("mu0 must be positive")
    den = mu0 + math.exp(2.0 * L * t) * (L - mu0)
    if den <= 0:
        raise PoleReached(f"t = {t} is at or beyond the blow-up time")
    return mu0 * L / den


def integrate_scalar(f, mu0: float, t_end: float, dt: float, blowup: float = 1e12):
    """Fixed-step RK4 for a scalar ODE; returns arrays (t, mu)."""
    n = max(1, int(round(abs(t_end) / dt)))
    h = t_end / n
    ts = np.empty(n + 1)
    mus = np.empty(n + 1)
    ts[0], mus[0] = 0.0, mu0
    mu = float(mu0)
    for k in range(1, n + 1):
        mu = rk4_step(f, mu, h)
        if not math.isfinite(mu) or abs(mu) > blowup:
            raise BlowupDetected(f"solution left the bounded region at t = {k * h:.6g}")
        ts[k], mus[k] = k * h, mu
    return ts, mus


@dataclass(frozen=True)
class ScalarOdeSpec:
    psi1: float
    psi2: float
    alpha: float = 0.0
    mu0: float = 1.0

    def __post_init__(self):
        if self.psi2 < 0:
            raise BadParams("psi2 must be nonnegative")

    def rhs(self, mu: float) -> float:
        return 4.0 * mu * (mu + self.psi1) - self.psi2

    @property
    def stationary(self) -> tuple[float, float]:
        root = math.sqrt(self.psi1 ** 2 + self.psi2)
        return 0.5 * (-self.psi1 + root), 0.5 * (-self.psi1 - root)


@dataclass
class ScalarResult:
    t: np.ndarray
    mu: np.ndarray
    mu_plus: float
    mu_minus: float

    @property
    def final(self) -> float:
        return float(self.mu[-1])


def scalar_case_i(spec: ScalarOdeSpec, t_end: float = -3.0, dt: float = 1e-3) -> ScalarResult:
    """Backward RK4 for ``mu' = 4 mu (mu + Psi1) - Psi2`` with its two stationary points."""
    if t_end >= 0:
        raise BadParams("scalar_case_i integrates backward: t_end must be negative")
    mu_p, mu_m = spec.stationary
    t, mu = integrate_scalar(spec.rhs, spec.mu0, t_end, dt)
    return ScalarResult(t, mu, mu_p, mu_m)


# --- limits and retraction ----------------------------------------------------------------

def ric_eigenframe(model: LieFoliationModel) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and a G-orthonormal eigenframe (columns) of ``Ric_perp(0)``."""
    G = model.horizontal_metric
    r = partial_ricci_form(theta_forms(model), G)
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise NotPositive("eigenframe needs a positive definite horizontal metric") from exc
    Linv = np.linalg.inv(L)
    mu, U = np.linalg.eigh(Linv @ r @ Linv.T)
    return mu, Linv.T @ U


def limit_metric(model: LieFoliationModel, phi_const: float) -> np.ndarray:
    """Horizontal metric with ``g(e_i, e_j) = delta_ij sqrt(mu_i(0)/Phi)`` in the eigenframe."""
    if phi_const <= 0:
        raise BadParams("phi_const must be positive")
    mu, V = ric_eigenframe(model)
    if mu.size == 0 or mu[0] <= 0:
        raise NotPositive(f"Ric_perp(0) is not positive definite (min eigenvalue {mu.min(initial=0.0):.6g})")
    Vinv = np.linalg.inv(V)
    Ghat = Vinv.T @ np.diag(np.sqrt(mu / phi_const)) @ Vinv
    return 0.5 * (Ghat + Ghat.T)


def interpolated_metric(model: LieFoliationModel, phi_const: float, t: float) -> np.ndarray:
    """``g_t(e_i, e_j) = delta_ij (mu_i(0)^2 / mu_i(t)^2)^(1/4)`` in the initial eigenframe."""
    mu, V = ric_eigenframe(model)
    mut = np.array([closed_form_mu(m, phi_const, t) for m in mu])
    Vinv = np.linalg.inv(V)
    Gt = Vinv.T @ np.diag(np.sqrt(mu / mut)) @ Vinv
    return 0.5 * (Gt + Gt.T)


@dataclass
class RetractionReport:
    kind: str
    classification_end: object
    classification_limit: object
    q_deviation: float
    normality_limit: float
    axioms_limit: dict
    mixed_sectional: list
    limit_metric: np.ndarray
    end_metric: np.ndarray
    tol: float

    @property
    def classical(self) -> bool:
        return self.q_deviation <= self.tol and self.classification_limit.classical

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "label_end": self.classification_end.label,
            "label_limit": self.classification_limit.label,
            "q_deviation": self.q_deviation,
            "normality_limit": self.normality_limit,
            "axioms_limit": {k: float(v) for k, v in self.axioms_limit.items()},
            "mixed_sectional": [float(k) for k in self.mixed_sectional],
            "classical": bool(self.classical),
        }


def retract_and_verify(model: LieFoliationModel, cfg: FlowConfig, traj: FlowTrajectory | None = None,
                       tol: float = 1e-6) -> RetractionReport:
    """Classify the structure ``phi_i = T#_i, Q = Ric_perp / p`` at ``G(t_end)`` and at the limit metric."""
    from .weak_structures import check_axioms, check_contact_metric, classify, induced_structure, normality_residual

    if traj is None:
        traj = integrate_flow(model, cfg)
    if not traj.converged:
        dev = max(abs(m - cfg.phi_const) for m in traj.final.ric_eigs)
        raise NotConverged(f"flow did not converge: |Ric_perp - Phi id| = {dev:.3e} at t = {traj.final.t}")
    kind = cfg.kind
    m_end = traj.model_at()
    s_end = induced_structure(m_end, kind)
    cls_end = classify(s_end, m_end)
    Ghat = limit_metric(model, cfg.phi_const)
    m_hat = model.with_horizontal_metric(Ghat)
    s_hat = induced_structure(m_hat, kind)
    cls_hat = classify(s_hat, m_hat, tol=tol)
    q_dev = float(np.max(np.abs(s_hat.Q - np.eye(model.dim))))
    axioms = dict(check_axioms(s_hat, m_hat).residuals)
    axioms["deta_minus_F"] = check_contact_metric(s_hat, m_hat).residuals["deta_minus_F"]
    R = curvature(m_hat, levi_civita(m_hat))
    ks = []
    h0 = model.horizontal[0]
    for xi in model.vertical:
        x = np.zeros(model.dim)
        x[h0] = 1.0
        ks.append(sectional_curvature(m_hat, R, np.eye(model.dim)[xi], x))
    return RetractionReport(s_hat.kind, cls_end, cls_hat, q_dev, normality_residual(m_hat, s_hat),
                            axioms, ks, Ghat, traj.final.G, tol)


def convergence_report(traj: FlowTrajectory, phi_const: float, lo: float = 1e-12, hi: float = 1e-2) -> dict:
    """Least-squares slope of ``log |Ric_perp - Phi id|_inf`` against ``t`` over the tail."""
    ts, ys = [], []
    thetas = theta_forms(traj.model)
    for s in traj.samples:
        ric = ric_operator(thetas, s.G)
        dev = float(np.max(np.abs(ric - phi_const * np.eye(ric.shape[0]))))
        if lo < dev < hi:
            ts.append(s.t)
            ys.append(math.log(dev))
    if len(ts) < 10:
        raise InsufficientSamples(f"only {len(ts)} samples with deviation in ({lo}, {hi})")
    A = np.vstack([ts, np.ones(len(ts))]).T
    coef, *_ = np.linalg.lstsq(A, np.array(ys), rcond=None)
    fit = A @ coef - np.array(ys)
    return {"rate": float(coef[0]), "fit_error": float(np.sqrt(np.mean(fit ** 2))), "samples": len(ts)}


def tsharp_along(traj: FlowTrajectory, sample: FlowSample | None = None) -> list[np.ndarray]:
    return tsharp_from_brackets(traj.model, (sample or traj.final).G)
