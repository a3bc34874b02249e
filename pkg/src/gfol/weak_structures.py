"""Weak almost contact, p-contact, f- and para-phi-structures on models.

A structure is a tuple of constant tensors in the model frame: ``phis`` are
N x N matrices acting on column vectors, ``xis`` frame vectors, ``etas``
covectors (row vectors) and ``Q`` an N x N matrix.  The checkers return
named residuals; a check passes when every residual is at most ``PASS_TOL``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import KindMismatch, NonCommuting, NotSkewInFrame, ParseError, SingularQ, StructureError
from .lie_model import RANK_TOL, LieFoliationModel
from .tensor_geometry import d_eta, d_two_form, nijenhuis, tsharp_from_brackets

PASS_TOL = 1e-10
KINDS = ("contact", "p_contact", "f_structure", "para_phi")


@dataclass(frozen=True, eq=False)
class FramedStructure:
    kind: str
    phis: tuple
    xis: tuple
    etas: tuple
    Q: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise KindMismatch(f"unknown structure kind {self.kind!r}")
        object.__setattr__(self, "phis", tuple(np.asarray(a, dtype=float) for a in self.phis))
        object.__setattr__(self, "xis", tuple(np.asarray(a, dtype=float) for a in self.xis))
        object.__setattr__(self, "etas", tuple(np.asarray(a, dtype=float) for a in self.etas))
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))
        if len(self.xis) != len(self.etas) or not self.xis:
            raise StructureError("need matching, nonempty lists of xi and eta")
        expected = len(self.xis) if self.kind == "p_contact" else 1
        if len(self.phis) != expected:
            raise StructureError(f"kind {self.kind} needs {expected} phi tensor(s), got {len(self.phis)}")
        if self.kind == "contact" and len(self.xis) != 1:
            raise StructureError("a contact structure has exactly one characteristic field")

    @property
    def p(self) -> int:
        return len(self.xis)

    @property
    def phi(self) -> np.ndarray:
        return self.phis[0]


@dataclass
class CheckReport:
    name: str
    residuals: dict
    tol: float = PASS_TOL
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.residuals.values())

    @property
    def worst(self) -> float:
        return max(self.residuals.values(), default=0.0)


def _mx(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _rank(a: np.ndarray) -> int:
    return int(np.sum(np.linalg.svd(a, compute_uv=False) > RANK_TOL))


def levi_civita_symbol(p: int) -> np.ndarray:
    """eps[i, j, k]: the Levi-Civita symbol for p = 3, identically zero otherwise."""
    eps = np.zeros((p, p, p))
    if p == 3:
        for (i, j, k), s in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1,
                             (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}.items():
            eps[i, j, k] = s
    return eps


def _frame_terms(s: FramedStructure) -> np.ndarray:
    # sum_i eta^i (x) xi_i as an endomorphism
    return sum(np.outer(x, e) for x, e in zip(s.xis, s.etas))


def _common_residuals(s: FramedStructure, model: LieFoliationModel, phi: np.ndarray, prefix="phi") -> dict:
    p = s.p
    gram = np.array([[e @ x for x in s.xis] for e in s.etas])
    Q = s.Q
    smin = float(np.min(np.linalg.svd(Q, compute_uv=False)))
    return {
        "eta_xi": _mx(gram - np.eye(p)),
        "Q_xi": max(_mx(Q @ x - x) for x in s.xis),
        "Q_singular": 0.0 if smin > RANK_TOL else 1.0,
        f"{prefix}_xi": max(_mx(phi @ x) for x in s.xis),
        f"eta_{prefix}": max(_mx(e @ phi) for e in s.etas),
        f"Q_{prefix}_commutator": _mx(Q @ phi - phi @ Q),
        "rank": float(abs(_rank(phi) - (model.dim - p))),
    }


def check_weak_almost_contact(s: FramedStructure, model: LieFoliationModel) -> CheckReport:
    """Defining identities and their consequences for a weak almost contact structure."""
    if s.kind != "contact":
        raise KindMismatch(f"expected a contact structure, got {s.kind}")
    phi, xi, eta = s.phi, s.xis[0], s.etas[0]
    res = {"phi2_plus_Q": _mx(phi @ phi + s.Q - np.outer(xi, eta))}
    res.update(_common_residuals(s, model, phi))
    return CheckReport("weak_almost_contact", res)


def check_weak_f(s: FramedStructure, model: LieFoliationModel) -> CheckReport:
    if s.kind != "f_structure":
        raise KindMismatch(f"expected an f-structure, got {s.kind}")
    f = s.phi
    res = {
        "f3_plus_fQ": _mx(f @ f @ f + f @ s.Q),
        "f2_plus_Q": _mx(f @ f + s.Q - _frame_terms(s)),
    }
    res.update(_common_residuals(s, model, f, prefix="f"))
    return CheckReport("weak_f", res)


def check_weak_para(s: FramedStructure, model: LieFoliationModel) -> CheckReport:
    if s.kind != "para_phi":
        raise KindMismatch(f"expected a para-phi-structure, got {s.kind}")
    phi = s.phi
    res = {
        "phi3_minus_phiQ": _mx(phi @ phi @ phi - phi @ s.Q),
        "phi2_minus_Q": _mx(phi @ phi - s.Q + _frame_terms(s)),
    }
    res.update(_common_residuals(s, model, phi))
    return CheckReport("weak_para", res)


def p_contact_composition(s: FramedStructure) -> np.ndarray:
    """Table of ``|phi_i phi_j + delta_ij Q - eta^j (x) xi_i - sum_k eps_ijk phi_k|``."""
    p = s.p
    eps = levi_civita_symbol(p)
    table = np.zeros((p, p))
    for i in range(p):
        for j in range(p):
            lhs = s.phis[i] @ s.phis[j]
            rhs = -(i == j) * s.Q + np.outer(s.xis[i], s.etas[j])
            rhs = rhs + sum(eps[i, j, k] * s.phis[k] for k in range(p))
            table[i, j] = _mx(lhs - rhs)
    return table


def check_p_contact(s: FramedStructure, model: LieFoliationModel) -> CheckReport:
    """Composition table of a weak almost p-contact structure plus derived identities.

    The derived identity for ``eta^i o phi_j`` is checked in the form
    ``eta^i(phi_j X) = sum_k eps_ijk eta^k(X)``, which follows from skewness
    of ``phi_j`` and ``phi_j xi_k = sum_l eps_jkl xi_l``.
    """
    if s.kind != "p_contact":
        raise KindMismatch(f"expected a p-contact structure, got {s.kind}")
    p = s.p
    if p == 1:
        single = FramedStructure("contact", s.phis, s.xis, s.etas, s.Q)
        rep = check_weak_almost_contact(single, model)
        return CheckReport("p_contact", rep.residuals)
    eps = levi_civita_symbol(p)
    table = p_contact_composition(s)
    gram = np.array([[e @ x for x in s.xis] for e in s.etas])
    phi_xi = 0.0
    eta_phi = 0.0
    for i in range(p):
        for j in range(p):
            phi_xi = max(phi_xi, _mx(s.phis[i] @ s.xis[j] - sum(eps[i, j, k] * s.xis[k] for k in range(p))))
            eta_phi = max(eta_phi, _mx(s.etas[i] @ s.phis[j] - sum(eps[i, j, k] * s.etas[k] for k in range(p))))
    smin = float(np.min(np.linalg.svd(s.Q, compute_uv=False)))
    res = {
        "composition": float(table.max()),
        "phi_xi": phi_xi,
        "eta_phi": eta_phi,
        "eta_xi": _mx(gram - np.eye(p)),
        "Q_xi": max(_mx(s.Q @ x - x) for x in s.xis),
        "Q_singular": 0.0 if smin > RANK_TOL else 1.0,
        "Q_phi_commutator": max(_mx(s.Q @ ph - ph @ s.Q) for ph in s.phis),
    }
    return CheckReport("p_contact", res, info={"composition_table": table.tolist()})


def check_axioms(s: FramedStructure, model: LieFoliationModel) -> CheckReport:
    return {
        "contact": check_weak_almost_contact,
        "p_contact": check_p_contact,
        "f_structure": check_weak_f,
        "para_phi": check_weak_para,
    }[s.kind](s, model)


def check_metric_compat(s: FramedStructure, model: LieFoliationModel) -> CheckReport:
    """Compatibility identity of the family together with skewness and self-adjointness."""
    G, Q = model.metric, s.Q
    outer = [np.outer(e, e) for e in s.etas]
    if s.kind == "contact":
        comp = _mx(s.phi.T @ G @ s.phi - (G @ Q - outer[0]))
    elif s.kind == "p_contact":
        comp = max(_mx(ph.T @ G @ ph - (G @ Q - o)) for ph, o in zip(s.phis, outer))
    elif s.kind == "f_structure":
        comp = _mx(s.phi.T @ G @ s.phi - (G @ Q - sum(outer)))
    else:
        comp = _mx(s.phi.T @ G @ s.phi - (-G @ Q + sum(outer)))
    X = np.array(s.xis)
    return CheckReport("metric_compat", {
        "compatibility": comp,
        "phi_skew": max(_mx(G @ ph + ph.T @ G) for ph in s.phis),
        "Q_self_adjoint": _mx(G @ Q - Q.T @ G),
        "xi_orthonormal": _mx(X @ G @ X.T - np.eye(s.p)),
        "eta_dual": max(_mx(e - G @ x) for x, e in zip(s.xis, s.etas)),
    })


def fundamental_forms(s: FramedStructure, model: LieFoliationModel) -> list[np.ndarray]:
    """``F_i(X, Y) = g(X, phi_i Y)``; a single form for f- and para-structures."""
    forms = [model.metric @ ph for ph in s.phis]
    if s.kind == "p_contact":
        # the eps-rotation of the vertical frame is not seen by d eta^i when the
        # xi_i commute, so compare on pairs with at least one horizontal argument
        v = list(model.vertical)
        for F in forms:
            F[np.ix_(v, v)] = 0.0
    return forms


def check_contact_metric(s: FramedStructure, model: LieFoliationModel) -> CheckReport:
    """``d eta^i = F`` per i, plus ``|d eta^i|`` (C-test) and ``|dF|`` (K-test)."""
    forms = fundamental_forms(s, model)
    per_i, closed = {}, {}
    for i, eta in enumerate(s.etas):
        F = forms[i] if s.kind == "p_contact" else forms[0]
        de = d_eta(model, eta)
        per_i[f"deta_minus_F[{i}]"] = _mx(de - F)
        closed[f"deta[{i}]"] = _mx(de)
    dF = max(_mx(d_two_form(model, F)) for F in forms)
    rep = CheckReport("contact_metric", {"deta_minus_F": max(per_i.values())})
    rep.info = {"per_index": per_i, "deta": max(closed.values()), "dF": dF}
    return rep


def normality_tensor(model: LieFoliationModel, s: FramedStructure) -> list[np.ndarray]:
    """``N_phi + 2 sum_i d eta^i (x) xi_i`` (minus sign for para), per phi tensor."""
    sign = -1.0 if s.kind == "para_phi" else 1.0
    if s.kind == "p_contact":
        groups = [(s.phis[i], [(s.xis[i], s.etas[i])]) for i in range(s.p)]
    else:
        groups = [(s.phi, list(zip(s.xis, s.etas)))]
    out = []
    for phi, frames in groups:
        N = nijenhuis(model, phi)
        for xi, eta in frames:
            N = N + sign * 2.0 * np.einsum("k,ij->kij", xi, d_eta(model, eta))
        out.append(N)
    return out


def normality_residual(model: LieFoliationModel, s: FramedStructure) -> float:
    return max(_mx(N) for N in normality_tensor(model, s))


# --- constructors ----------------------------------------------------------

def _extend(model: LieFoliationModel, op: np.ndarray) -> np.ndarray:
    h = list(model.horizontal)
    full = np.zeros((model.dim, model.dim))
    full[np.ix_(h, h)] = op
    return full


def default_kind(model: LieFoliationModel) -> str:
    if not model.is_riemannian:
        return "para_phi"
    return "contact" if model.p == 1 else "f_structure"


def induced_structure(model: LieFoliationModel, kind: str | None = None) -> FramedStructure:
    """Structure with ``phi_i = T#_{xi_i}`` on D and ``Q = (1/p) Ric_perp`` on D.

    For ``para_phi`` the horizontal block of ``Q`` is ``phi^2`` instead, and for
    ``p_contact`` the ``phi_i`` rotate the vertical frame by ``eps_ijk``.
    """
    kind = kind or default_kind(model)
    v = list(model.vertical)
    p = model.p
    ts = tsharp_from_brackets(model)
    xis = [np.eye(model.dim)[k] for k in v]
    etas = [model.metric[k].copy() for k in v]
    n = len(model.horizontal)
    ric = -sum((t @ t for t in ts), np.zeros((n, n)))
    Q = _extend(model, ric / p)
    if kind == "para_phi":
        Q = _extend(model, ts[0] @ ts[0])
    Q[v, v] = 1.0
    if kind == "p_contact":
        eps = levi_civita_symbol(p)
        phis = []
        for i in range(p):
            ph = _extend(model, ts[i])
            for j in range(p):
                for k in range(p):
                    ph[v[k], v[j]] += eps[i, j, k]
            phis.append(ph)
    elif kind == "contact":
        if p != 1:
            raise KindMismatch("contact structures need exactly one vertical slot")
        phis = [_extend(model, ts[0])]
    else:
        phis = [_extend(model, ts[0])]
    return FramedStructure(kind, tuple(phis), tuple(xis), tuple(etas), Q)


def perturb_structure(classical: FramedStructure, phi_prime, model: LieFoliationModel) -> FramedStructure:
    """Deform ``phi`` by a commuting ``phi'``: ``Q = id - (phi phi' + phi' phi) - phi'^2`` on D."""
    if classical.kind != "contact":
        raise KindMismatch("perturbation is defined for contact structures")
    phi = classical.phi
    dphi = np.asarray(phi_prime, dtype=float)
    comm = _mx(phi @ dphi - dphi @ phi)
    if comm > 1e-12:
        raise NonCommuting(f"phi' does not commute with phi (residual {comm:.3e})")
    xi, eta = classical.xis[0], classical.etas[0]
    if _mx(dphi @ xi) > 1e-12 or _mx(eta @ dphi) > 1e-12:
        raise StructureError("phi' must vanish on the vertical distribution and take values in D")
    proj = np.eye(model.dim) - np.outer(xi, eta)
    Q = np.eye(model.dim) - proj @ (phi @ dphi + dphi @ phi + dphi @ dphi) @ proj
    h = list(model.horizontal)
    smin = float(np.min(np.linalg.svd(Q[np.ix_(h, h)], compute_uv=False))) if h else 1.0
    if smin <= RANK_TOL:
        raise SingularQ(f"perturbed Q is singular (smallest singular value {smin:.3e})")
    return FramedStructure("contact", (phi + dphi,), classical.xis, classical.etas, Q)


def skew_commutant_basis(phi_d: np.ndarray, gh: np.ndarray) -> list[np.ndarray]:
    """Basis of g-skew operators on D commuting with ``phi_d``."""
    n = phi_d.shape[0]
    ginv = np.linalg.inv(gh)
    skews = []
    for a in range(n):
        for b in range(a + 1, n):
            K = np.zeros((n, n))
            K[a, b], K[b, a] = 1.0, -1.0
            skews.append(ginv @ K)
    if not skews:
        return []
    M = np.array([(phi_d @ S - S @ phi_d).ravel() for S in skews]).T
    _, sv, vt = np.linalg.svd(M)
    null = vt[np.sum(sv > 1e-10):]
    return [sum(c * S for c, S in zip(vec, skews)) for vec in null]


def random_commuting_perturbation(s: FramedStructure, model: LieFoliationModel, rng, scale=0.3) -> np.ndarray:
    """Random g-skew ``phi'`` commuting with ``phi``, supported on D, of operator norm <= scale."""
    h = list(model.horizontal)
    basis = skew_commutant_basis(s.phi[np.ix_(h, h)], model.horizontal_metric)
    coeffs = rng.standard_normal(len(basis))
    op = sum(c * B for c, B in zip(coeffs, basis))
    norm = np.linalg.norm(op, 2)
    if norm > 0:
        op = op * (scale * rng.uniform(0.05, 1.0) / norm)
    return _extend(model, op)


def skew_frame(phi: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """A real frame (columns) in which ``phi`` has a skew-symmetric matrix.

    Exists iff ``phi`` is diagonalizable with purely imaginary spectrum.
    """
    phi = np.asarray(phi, dtype=float)
    n = phi.shape[0]
    w, V = np.linalg.eig(phi)
    scale = max(1.0, _mx(phi))
    if np.any(np.abs(w.real) > tol * scale):
        raise NotSkewInFrame(f"eigenvalue with nonzero real part: {w[np.argmax(np.abs(w.real))]}")
    cols = []
    kernel = np.abs(w) <= tol * scale
    if kernel.any():
        # real basis of the kernel
        _, sv, vt = np.linalg.svd(phi)
        k = n - int(np.sum(sv > tol * scale))
        cols.extend(vt[n - k:])
    for idx in np.where(~kernel & (w.imag > 0))[0]:
        v = V[:, idx]
        a, b = v.real, v.imag
        cols.extend([a, b])
    S = np.array(cols).T
    if S.shape != (n, n) or np.min(np.linalg.svd(S, compute_uv=False)) <= RANK_TOL:
        raise NotSkewInFrame("phi is not diagonalizable over C")
    return S


def compatible_metric_from_frame(phi, frame_matrix=None) -> np.ndarray:
    """Metric in which the given frame (columns) is orthonormal; phi must be skew in it."""
    phi = np.asarray(phi, dtype=float)
    S = skew_frame(phi) if frame_matrix is None else np.asarray(frame_matrix, dtype=float)
    local = np.linalg.solve(S, phi @ S)
    skew = _mx(local + local.T)
    if skew > 1e-10 * max(1.0, _mx(local)):
        raise NotSkewInFrame(f"phi is not skew-symmetric in the given frame (residual {skew:.3e})")
    Sinv = np.linalg.inv(S)
    G = Sinv.T @ Sinv
    return 0.5 * (G + G.T)


# --- classification ----------------------------------------------------------

_LADDERS = {
    "contact": {
        0: ("not a weak almost contact structure", "not an almost contact structure"),
        1: ("weak almost contact", "almost contact (classical)"),
        2: ("weak almost contact metric", "almost contact metric (classical)"),
        3: ("weak contact metric, non-normal", "contact metric (classical), non-normal"),
        4: ("weak Sasakian", "Sasakian (classical)"),
    },
    "p_contact": {
        0: ("not a weak almost {p}-contact structure", "not an almost {p}-contact structure"),
        1: ("weak almost {p}-contact", "almost {p}-contact (classical)"),
        2: ("weak almost {p}-contact metric", "almost {p}-contact metric (classical)"),
        3: ("weak {p}-contact metric, non-normal", "{p}-contact metric (classical), non-normal"),
        4: ("weak {p}-Sasakian", "{p}-Sasakian (classical)"),
    },
    "para_phi": {
        0: ("not a weak para-φ-structure", "not a para-φ-structure"),
        1: ("weak almost para-φ", "almost para-φ (classical)"),
        2: ("metric weak almost para-φ", "metric almost para-φ (classical)"),
        3: ("metric weak almost para-𝒮, non-normal", "metric almost para-𝒮 (classical), non-normal"),
        4: ("weak para-𝒮", "para-𝒮 (classical)"),
    },
}

_F_LABELS = {
    "none": (0, "not a weak globally framed f-structure", "not a globally framed f-structure"),
    "framed": (1, "weak globally framed f", "globally framed f (classical)"),
    "metric": (2, "metric weak f", "metric f-structure (classical)"),
    "almost_s": (3, "weak almost 𝒮", "almost 𝒮-structure (classical)"),
    "almost_c": (3, "weak almost 𝒞", "almost 𝒞-structure (classical)"),
    "k": (3, "weak 𝒦", "𝒦-structure (classical)"),
    "s": (4, "weak 𝒮", "metric 𝒮-structure (classical)"),
    "c": (4, "weak 𝒞", "metric 𝒞-structure (classical)"),
}

FLAG_NAMES = ("axioms", "metric", "contact_metric", "closed", "kahler", "normal", "classical")


def label_from_flags(kind: str, flags: dict, p: int = 1) -> tuple[str, int]:
    """Most specific label for the pass/fail flags; returns (label, specificity rank)."""
    classical = bool(flags.get("classical")) and bool(flags.get("axioms"))
    pick = 1 if classical else 0
    if kind == "f_structure":
        if not flags["axioms"]:
            key = "none"
        elif not flags["metric"]:
            key = "framed"
        elif flags["contact_metric"]:
            key = "s" if flags["normal"] else "almost_s"
        elif flags["closed"]:
            key = "c" if flags["normal"] else "almost_c"
        elif flags["normal"] and flags["kahler"]:
            key = "k"
        else:
            key = "metric"
        rank, weak, classic = _F_LABELS[key]
        return (classic if classical else weak), rank
    if not flags["axioms"]:
        rank = 0
    elif not flags["metric"]:
        rank = 1
    elif not flags["contact_metric"]:
        rank = 2
    elif not flags["normal"]:
        rank = 3
    else:
        rank = 4
    return _LADDERS[kind][rank][pick].format(p=p), rank


def slugify(label: str) -> str:
    s = label.replace("𝒮", "s").replace("𝒞", "c").replace("𝒦", "k").replace("φ", "phi").lower()
    s = re.sub(r"[^a-z0-9-]+", "-", s)
    return re.sub(r"-+", "-", s).strip("-")


@dataclass
class Classification:
    label: str
    rank: int
    classical: bool
    flags: dict
    residuals: dict

    @property
    def slug(self) -> str:
        return slugify(self.label)

    def to_json(self) -> dict:
        return {"label": self.label, "slug": self.slug, "residuals": dict(self.residuals)}


def classify(s: FramedStructure, model: LieFoliationModel, tol: float = PASS_TOL) -> Classification:
    ax = check_axioms(s, model)
    mc = check_metric_compat(s, model)
    cm = check_contact_metric(s, model)
    normal = normality_residual(model, s)
    q_dev = _mx(s.Q - np.eye(model.dim))
    residuals = {}
    residuals.update({f"axioms.{k}": v for k, v in ax.residuals.items()})
    residuals.update({f"metric.{k}": v for k, v in mc.residuals.items()})
    residuals["contact_metric.deta_minus_F"] = cm.residuals["deta_minus_F"]
    residuals["contact_metric.deta"] = cm.info["deta"]
    residuals["contact_metric.dF"] = cm.info["dF"]
    residuals["normality"] = normal
    residuals["Q_minus_id"] = q_dev
    flags = {
        "axioms": all(v <= tol for v in ax.residuals.values()),
        "metric": all(v <= tol for v in mc.residuals.values()),
        "contact_metric": cm.residuals["deta_minus_F"] <= tol,
        "closed": cm.info["deta"] <= tol,
        "kahler": cm.info["dF"] <= tol,
        "normal": normal <= tol,
        "classical": q_dev <= tol,
    }
    label, rank = label_from_flags(s.kind, flags, s.p)
    return Classification(label, rank, flags["classical"] and flags["axioms"], flags, residuals)


# --- file embedding ------------------------------------------------------------

def structure_from_dict(doc: dict, model: LieFoliationModel) -> FramedStructure:
    """Parse the ``structure`` entry of a model file."""
    n = model.dim
    known = {"kind", "phi", "phis", "Q", "xi", "eta"}
    if set(doc) - known:
        raise ParseError(f"unknown structure keys: {sorted(set(doc) - known)}")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ParseError(f"structure kind must be one of {KINDS}")

    def square(a, what):
        if not isinstance(a, list) or len(a) != n * n:
            raise ParseError(f"{what} must be a row-major array of {n * n} reals")
        return np.array(a, dtype=float).reshape(n, n)

    if "phis" in doc:
        phis = [square(a, "phis entry") for a in doc["phis"]]
    elif "phi" in doc:
        phis = [square(doc["phi"], "phi")]
    else:
        raise ParseError("structure needs phi or phis")
    xi_idx = doc.get("xi", list(model.vertical))
    xis = [np.eye(n)[int(k)] for k in xi_idx]
    if "eta" in doc:
        etas = [np.array(e, dtype=float) for e in doc["eta"]]
        if any(e.shape != (n,) for e in etas):
            raise ParseError(f"eta entries must have {n} coefficients")
    else:
        etas = [model.metric[int(k)].copy() for k in xi_idx]
    Q = square(doc["Q"], "Q") if "Q" in doc else np.eye(n)
    return FramedStructure(kind, tuple(phis), tuple(xis), tuple(etas), Q)


def structure_to_dict(s: FramedStructure) -> dict:
    doc = {"kind": s.kind}
    if s.kind == "p_contact":
        doc["phis"] = [[float(x) for x in ph.ravel()] for ph in s.phis]
    else:
        doc["phi"] = [float(x) for x in s.phi.ravel()]
    doc["Q"] = [float(x) for x in s.Q.ravel()]
    doc["xi"] = [int(np.argmax(np.abs(x))) for x in s.xis]
    doc["eta"] = [[float(c) for c in e] for e in s.etas]
    return doc
