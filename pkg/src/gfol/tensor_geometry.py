"""Connection, curvature and foliation tensors of invariant metrics.

Index conventions (all arrays are in the model frame):

* ``gamma[k, i, j]`` is the k-th component of ``nabla_{E_i} E_j``.
* ``curvature[i, j, k, l]`` is the l-th component of ``R(E_i, E_j) E_k`` with
  ``R(X, Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y]``.
* Operators on the horizontal distribution D (``A``, ``Tsharp``, ``C``,
  ``ric_perp``) and bilinear forms on D (``r_g``) are ``h x h`` matrices in the
  horizontal slots ``model.horizontal``; operators act on column vectors.
* Vertical quantities are indexed by position in ``model.vertical``.

The partial Ricci operator is oriented as ``X -> sum_i (R(X, xi_i) xi_i)^perp``,
i.e. by mixed sectional curvatures, so it is positive on Sasakian models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMetric, NotCompatible
from .lie_model import RANK_TOL, LieFoliationModel, check_compatible

COMPAT_TOL = 1e-10


def _lowered_brackets(model: LieFoliationModel) -> np.ndarray:
    # cl[i, j, k] = g([E_i, E_j], E_k)
    return np.einsum("mij,mk->ijk", model.c, model.metric)


def koszul(model: LieFoliationModel) -> np.ndarray:
    """``K[i, j, k] = g(nabla_{E_i} E_j, E_k)`` from the Koszul formula."""
    cl = _lowered_brackets(model)
    return 0.5 * (cl - cl.transpose(2, 0, 1) + cl.transpose(1, 2, 0))


def levi_civita(model: LieFoliationModel) -> np.ndarray:
    g = model.metric
    if np.min(np.linalg.svd(g, compute_uv=False)) <= RANK_TOL:
        raise DegenerateMetric("metric is singular")
    return np.einsum("lk,ijk->lij", np.linalg.inv(g), koszul(model))


def connection_residuals(model: LieFoliationModel, gamma: np.ndarray) -> dict:
    """Metric compatibility and torsion residuals of a connection table."""
    low = np.einsum("lij,lk->ijk", gamma, model.metric)
    metric = np.max(np.abs(low + low.transpose(0, 2, 1))) if low.size else 0.0
    torsion = gamma - gamma.transpose(0, 2, 1) - model.c
    return {"metric": float(metric), "torsion": float(np.max(np.abs(torsion)) if torsion.size else 0.0)}


def connection_matrices(gamma: np.ndarray) -> np.ndarray:
    """``M[i]`` is the matrix of ``X -> nabla_{E_i} X`` on frame coordinates."""
    return gamma.transpose(1, 0, 2)


def covariant_derivative(gamma: np.ndarray, i: int, S: np.ndarray) -> np.ndarray:
    """``nabla_{E_i} S`` for an invariant (1,1)-tensor ``S`` (full N x N)."""
    M = connection_matrices(gamma)[i]
    return M @ S - S @ M


def curvature(model: LieFoliationModel, gamma: np.ndarray) -> np.ndarray:
    M = connection_matrices(gamma)
    comm = np.einsum("ilm,jmk->ijlk", M, M)
    ops = comm - comm.transpose(1, 0, 2, 3) - np.einsum("mij,mlk->ijlk", model.c, M)
    # ops[i, j] is the matrix of R(E_i, E_j); reorder to [i, j, k, l]
    return ops.transpose(0, 1, 3, 2)


def lowered_curvature(model: LieFoliationModel, R: np.ndarray) -> np.ndarray:
    """``Rl[i, j, k, l] = g(R(E_i, E_j) E_k, E_l)``."""
    return np.einsum("ijkm,ml->ijkl", R, model.metric)


def curvature_residuals(model: LieFoliationModel, R: np.ndarray) -> dict:
    Rl = lowered_curvature(model, R)
    if Rl.size == 0:
        return {"antisym_12": 0.0, "antisym_34": 0.0, "pair": 0.0, "bianchi": 0.0}

    def mx(a):
        return float(np.max(np.abs(a)))

    return {
        "antisym_12": mx(Rl + Rl.transpose(1, 0, 2, 3)),
        "antisym_34": mx(Rl + Rl.transpose(0, 1, 3, 2)),
        "pair": mx(Rl - Rl.transpose(2, 3, 0, 1)),
        "bianchi": mx(R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)),
    }


def sectional_curvature(model: LieFoliationModel, R: np.ndarray, x, y) -> float:
    """``K(x, y) = g(R(x, y) y, x) / (|x|^2 |y|^2 - g(x, y)^2)``."""
    g = model.metric
    Rl = lowered_curvature(model, R)
    num = np.einsum("ijkl,i,j,k,l->", Rl, x, y, y, x)
    den = (x @ g @ x) * (y @ g @ y) - (x @ g @ y) ** 2
    return float(num / den)


@dataclass
class FoliationTensors:
    h_tensor: np.ndarray  # h[v, a, b]: xi_v-component of h(e_a, e_b)
    T_tensor: np.ndarray  # T[v, a, b]: xi_v-component of T(e_a, e_b)
    A: list
    Tsharp: list
    C: list
    cc_residual: float  # max |C - (A + Tsharp)|


def _operator_from_form(gh: np.ndarray, form: np.ndarray) -> np.ndarray:
    # g(S x, y) = form(x, y)  =>  S = G^{-1} form^T
    return np.linalg.solve(gh, form.T)


def foliation_tensors(model: LieFoliationModel, gamma: np.ndarray) -> FoliationTensors:
    v, h = list(model.vertical), list(model.horizontal)
    gh = model.horizontal_metric
    gvv = model.metric[np.ix_(v, v)]
    block = gamma[np.ix_(v, h, h)]  # [vertical slot, a, b] of nabla_{e_a} e_b
    # g(., xi_i) on vertical components
    sym = 0.5 * (block + block.transpose(0, 2, 1))
    skew = 0.5 * (block - block.transpose(0, 2, 1))
    h_t = np.einsum("wab,wi->iab", sym, gvv)
    T_t = np.einsum("wab,wi->iab", skew, gvv)
    if not h:
        empty = [np.zeros((0, 0)) for _ in v]
        return FoliationTensors(h_t, T_t, empty, empty, empty, 0.0)
    A = [_operator_from_form(gh, h_t[i]) for i in range(len(v))]
    Ts = [_operator_from_form(gh, T_t[i]) for i in range(len(v))]
    # C_xi X = -(nabla_X xi)^perp
    C = [-gamma[np.ix_(h, h, [xi])][:, :, 0] for xi in v]
    cc = max(float(np.max(np.abs(C[i] - A[i] - Ts[i]))) for i in range(len(v)))
    return FoliationTensors(h_t, T_t, A, Ts, C, cc)


def partial_ricci(model: LieFoliationModel, R: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Curvature route: ``r_g(X, Y) = sum_i g(R(X, xi_i) xi_i, Y)`` on D and its adjoint."""
    v, h = list(model.vertical), list(model.horizontal)
    Rl = lowered_curvature(model, R)
    r = np.zeros((len(h), len(h)))
    for xi in v:
        r += Rl[np.ix_(h, [xi], [xi], h)][:, 0, 0, :]
    r = 0.5 * (r + r.T)
    ric = np.linalg.solve(model.horizontal_metric, r) if h else r
    return r, ric


def theta_forms(model: LieFoliationModel) -> list[np.ndarray]:
    """``Theta_i(e_a, e_b) = (1/2) g([e_a, e_b], xi_i)`` read off the bracket table."""
    v, h = list(model.vertical), list(model.horizontal)
    cl = _lowered_brackets(model)
    return [0.5 * cl[np.ix_(h, h, [xi])][:, :, 0] for xi in v]


def tsharp_from_brackets(model: LieFoliationModel, gh: np.ndarray | None = None) -> list[np.ndarray]:
    """``T#_{xi_i}`` from ``T(X, Y) = [X, Y]^T / 2``, without any connection."""
    gh = model.horizontal_metric if gh is None else gh
    return [_operator_from_form(gh, th) for th in theta_forms(model)]


def _require_compatible(model: LieFoliationModel):
    rep = check_compatible(model)
    worst = max(rep.totally_geodesic, rep.riemannian)
    if worst > COMPAT_TOL:
        raise NotCompatible(
            f"model {model.name!r} is not totally geodesic and Riemannian (residual {worst:.3e})"
        )


def partial_ricci_algebraic(model: LieFoliationModel) -> np.ndarray:
    """Algebraic route: ``Ric_perp = -sum_i (T#_{xi_i})^2`` on compatible models."""
    _require_compatible(model)
    ts = tsharp_from_brackets(model)
    n = len(model.horizontal)
    return -sum((t @ t for t in ts), np.zeros((n, n)))


def _extend(model: LieFoliationModel, op: np.ndarray) -> np.ndarray:
    """Embed an operator on D into the full frame, zero on the vertical slots."""
    h = list(model.horizontal)
    full = np.zeros((model.dim, model.dim))
    full[np.ix_(h, h)] = op
    return full


def _restrict(model: LieFoliationModel, full: np.ndarray) -> np.ndarray:
    h = list(model.horizontal)
    return full[np.ix_(h, h)]


def mixed_jacobi(model: LieFoliationModel, R: np.ndarray, pair: tuple[int, int]) -> np.ndarray:
    """Operator ``X -> (R(xi_i, X) xi_j)^perp`` in the orientation of the mixed identity.

    The identity is stated with the opposite curvature sign, so in the orientation
    used for ``R`` this is ``X -> (R(X, xi_i) xi_j)^perp``; for ``i == j`` it is the
    Jacobi operator ``X -> R(X, xi) xi``.
    """
    _require_compatible(model)
    i, j = pair
    xi, xj = model.vertical[i], model.vertical[j]
    h = list(model.horizontal)
    return R[np.ix_(h, [xi], [xj], h)][:, 0, 0, :].T


def mixed_jacobi_rhs(model: LieFoliationModel, gamma: np.ndarray, pair: tuple[int, int]) -> np.ndarray:
    """``nabla_{xi_i} T#_{xi_j} - T#_{xi_j} T#_{xi_i}`` on D."""
    i, j = pair
    ts = foliation_tensors(model, gamma).Tsharp
    nab = _restrict(model, covariant_derivative(gamma, model.vertical[i], _extend(model, ts[j])))
    return nab - ts[j] @ ts[i]


def ric_commutator_residual(model: LieFoliationModel, gamma: np.ndarray, ric: np.ndarray | None = None,
                            ft: FoliationTensors | None = None) -> float:
    """Max over xi of ``|nabla_xi Ric_perp - [Ric_perp, T#_xi]|``."""
    ft = foliation_tensors(model, gamma) if ft is None else ft
    if ric is None:
        ric = -sum(t @ t for t in ft.Tsharp)
    full = _extend(model, ric)
    worst = 0.0
    for i, xi in enumerate(model.vertical):
        lhs = _restrict(model, covariant_derivative(gamma, xi, full))
        rhs = ric @ ft.Tsharp[i] - ft.Tsharp[i] @ ric
        worst = max(worst, float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0)
    return worst


def leafwise_T_norm_derivative(model: LieFoliationModel, gamma: np.ndarray) -> list[float]:
    """``xi_i(|T|^2)`` computed as ``tr(nabla_{xi_i} Ric_perp)``; zero on invariant models."""
    ft = foliation_tensors(model, gamma)
    full = _extend(model, -sum(t @ t for t in ft.Tsharp))
    return [float(np.trace(covariant_derivative(gamma, xi, full))) for xi in model.vertical]


def d_eta(model: LieFoliationModel, eta) -> np.ndarray:
    """``d eta(E_i, E_j) = -(1/2) eta([E_i, E_j])`` for an invariant 1-form."""
    return -0.5 * np.einsum("k,kij->ij", np.asarray(eta, dtype=float), model.c)


def d_two_form(model: LieFoliationModel, F: np.ndarray) -> np.ndarray:
    """Exterior derivative of an invariant 2-form (same 1/2-normalisation family as d_eta)."""
    # dF(X,Y,Z) = -(1/3) (F([X,Y],Z) + F([Y,Z],X) + F([Z,X],Y))
    t = np.einsum("mij,mk->ijk", model.c, F)
    return -(t + t.transpose(1, 2, 0) + t.transpose(2, 0, 1)) / 3.0


def nijenhuis(model: LieFoliationModel, phi: np.ndarray) -> np.ndarray:
    """``N[k, i, j]``: k-th component of ``N_phi(E_i, E_j)``."""
    c = model.c
    phi = np.asarray(phi, dtype=float)
    sq = np.einsum("kl,lmn->kmn", phi @ phi, c)  # phi^2 [X, Y]
    both = np.einsum("kab,ai,bj->kij", c, phi, phi)  # [phi X, phi Y]
    left = np.einsum("kl,laj,ai->kij", phi, c, phi)  # phi [phi X, Y]
    right = np.einsum("kl,lib,bj->kij", phi, c, phi)  # phi [X, phi Y]
    return sq + both - left - right


@dataclass
class GeometryReport:
    gamma: np.ndarray
    curvature: np.ndarray
    h_tensor: np.ndarray
    T_tensor: np.ndarray
    A: list
    Tsharp: list
    C: list
    r_g: np.ndarray
    ric_perp: np.ndarray
    ric_perp_algebraic: np.ndarray | None
    residuals: dict

    def to_json(self) -> dict:
        def arr(a):
            return np.asarray(a, dtype=float).tolist()

        disc = self.residuals.get("ric_route_discrepancy")
        return {
            "index_order": {
                "gamma": "gamma[k][i][j] = k-th component of nabla_{E_i} E_j",
                "curvature": "row-major flattening of R[i][j][k][l] = l-th component of R(E_i,E_j)E_k",
                "operators": "horizontal-slot matrices acting on column vectors",
            },
            "gamma": arr(self.gamma),
            "curvature_shape": list(self.curvature.shape),
            "curvature": arr(self.curvature.ravel()),
            "tsharp": [arr(t) for t in self.Tsharp],
            "a": [arr(a) for a in self.A],
            "c": [arr(c) for c in self.C],
            "r_g": arr(self.r_g),
            "ric_perp": arr(self.ric_perp),
            "ric_perp_algebraic": None if self.ric_perp_algebraic is None else arr(self.ric_perp_algebraic),
            "ric_route_discrepancy": disc,
            "residuals": {k: float(v) for k, v in self.residuals.items() if v is not None},
        }


def geometry_report(model: LieFoliationModel) -> GeometryReport:
    gamma = levi_civita(model)
    R = curvature(model, gamma)
    ft = foliation_tensors(model, gamma)
    r, ric = partial_ricci(model, R)
    residuals = dict(connection_residuals(model, gamma))
    residuals.update({f"curvature_{k}": val for k, val in curvature_residuals(model, R).items()})
    residuals["cc_identity"] = ft.cc_residual
    try:
        alg = partial_ricci_algebraic(model)
    except NotCompatible:
        alg = None
        residuals["ric_route_discrepancy"] = None
    else:
        residuals["ric_route_discrepancy"] = float(np.max(np.abs(alg - ric))) if alg.size else 0.0
    return GeometryReport(gamma, R, ft.h_tensor, ft.T_tensor, ft.A, ft.Tsharp, ft.C, r, ric, alg, residuals)
