"""Lie-algebra presentations of g-foliations with a compatible metric.

A model is a real Lie algebra with a distinguished basis ``E_0..E_{N-1}``,
structure constants ``c[k, i, j]`` (``[E_i, E_j] = sum_k c[k, i, j] E_k``), a
set of vertical slots spanning the leaves and a constant inner product ``G``.
Every tensor in the package is a constant matrix in this frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import BadParams, ParseError, UnknownModel, ValidationError

RANK_TOL = 1e-10
VALIDATION_TOL = 1e-12

_FILE_KEYS = {"name", "dim", "vertical", "frame", "brackets", "metric", "structure"}
_REQUIRED_KEYS = _FILE_KEYS - {"structure"}


@dataclass(frozen=True, eq=False)
class LieFoliationModel:
    name: str
    dim: int
    vertical: tuple[int, ...]
    frame: tuple[str, ...]
    # sparse table: ((i, j, ((slot, coeff), ...)), ...) with i < j
    brackets: tuple
    metric: np.ndarray
    structure: dict | None = None
    c: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.zeros((self.dim, self.dim, self.dim))
        for i, j, coeffs in self.brackets:
            for k, value in coeffs:
                c[k, i, j] += value
                c[k, j, i] -= value
        c.setflags(write=False)
        metric = np.array(self.metric, dtype=float)
        metric.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "metric", metric)

    @property
    def p(self) -> int:
        return len(self.vertical)

    @property
    def horizontal(self) -> tuple[int, ...]:
        vert = set(self.vertical)
        return tuple(i for i in range(self.dim) if i not in vert)

    @property
    def horizontal_metric(self) -> np.ndarray:
        h = list(self.horizontal)
        return self.metric[np.ix_(h, h)].copy()

    @property
    def is_riemannian(self) -> bool:
        return bool(np.all(np.linalg.eigvalsh(self.metric) > RANK_TOL))

    def bracket(self, x, y) -> np.ndarray:
        """Bracket of two invariant vectors given by frame coordinates."""
        return np.einsum("kij,i,j->k", self.c, x, y)

    def with_metric(self, metric) -> "LieFoliationModel":
        return LieFoliationModel(
            self.name, self.dim, self.vertical, self.frame, self.brackets,
            np.array(metric, dtype=float), self.structure,
        )

    def with_horizontal_metric(self, gh) -> "LieFoliationModel":
        g = np.array(self.metric, dtype=float)
        h = list(self.horizontal)
        g[np.ix_(h, h)] = gh
        return self.with_metric(g)

    def __eq__(self, other):
        if not isinstance(other, LieFoliationModel):
            return NotImplemented
        return (
            self.name == other.name
            and self.dim == other.dim
            and self.vertical == other.vertical
            and self.frame == other.frame
            and self.brackets == other.brackets
            and np.array_equal(self.metric, other.metric)
            and self.structure == other.structure
        )

    __hash__ = None


def jacobi_residual(c: np.ndarray) -> float:
    """Max-norm of sum_cyc [E_i, [E_j, E_k]] over all triples."""
    t = np.einsum("lim,mjk->lijk", c, c)
    jac = t + t.transpose(0, 2, 3, 1) + t.transpose(0, 3, 1, 2)
    return float(np.max(np.abs(jac))) if jac.size else 0.0


def validate(model: LieFoliationModel) -> LieFoliationModel:
    """Check every model invariant; raise ValidationError naming the first failure."""
    n = model.dim
    if n < 1:
        raise ValidationError("dim", n, "dimension must be positive")
    if len(model.frame) != n:
        raise ValidationError("frame_labels", abs(len(model.frame) - n), "need one label per slot")
    if len(set(model.frame)) != n:
        raise ValidationError("frame_labels", n - len(set(model.frame)), "labels must be unique")
    vert = model.vertical
    if not vert:
        raise ValidationError("vertical", 0, "need at least one vertical slot")
    if len(set(vert)) != len(vert) or any(not 0 <= v < n for v in vert):
        raise ValidationError("vertical", 1, f"bad vertical index set {list(vert)}")
    for i, j, coeffs in model.brackets:
        if not (0 <= i < j < n):
            raise ValidationError("bracket_index", 1, f"pair ({i},{j}) must satisfy 0 <= i < j < dim")
        for k, _ in coeffs:
            if not 0 <= k < n:
                raise ValidationError("bracket_index", 1, f"slot {k} out of range")
    g = model.metric
    if g.shape != (n, n) or not np.all(np.isfinite(g)):
        raise ValidationError("metric_shape", 1, f"metric must be a finite {n}x{n} matrix")
    sym = float(np.max(np.abs(g - g.T)))
    if sym > VALIDATION_TOL:
        raise ValidationError("metric_symmetry", sym)
    v, h = list(vert), list(model.horizontal)
    vres = float(np.max(np.abs(g[np.ix_(v, v)] - np.eye(len(v)))))
    if vres > VALIDATION_TOL:
        raise ValidationError("vertical_orthonormal", vres, "vertical frame not orthonormal")
    if h:
        cross = float(np.max(np.abs(g[np.ix_(v, h)])))
        if cross > VALIDATION_TOL:
            raise ValidationError("block_diagonal", cross, "vertical and horizontal slots must be orthogonal")
        smin = float(np.min(np.linalg.svd(g[np.ix_(h, h)], compute_uv=False)))
        if smin <= RANK_TOL:
            raise ValidationError("horizontal_nondegenerate", smin)
        inv = float(np.max(np.abs(model.c[np.ix_(v, v, h)])))
        if inv > VALIDATION_TOL:
            raise ValidationError(
                "horizontal_invariance", inv, "[xi, X] has a vertical component for horizontal X"
            )
    jac = jacobi_residual(model.c)
    if jac > VALIDATION_TOL:
        raise ValidationError("jacobi", jac, "bracket table violates the Jacobi identity")
    return model


# --- file format -----------------------------------------------------------

def _as_real(value, what):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{what}: expected a number, got {value!r}")
    return float(value)


def _as_int(value, what):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{what}: expected an integer, got {value!r}")
    return value


def model_from_dict(doc: dict) -> LieFoliationModel:
    if not isinstance(doc, dict):
        raise ParseError("model file must contain a JSON object")
    unknown = set(doc) - _FILE_KEYS
    if unknown:
        raise ParseError(f"unknown keys: {sorted(unknown)}")
    missing = _REQUIRED_KEYS - set(doc)
    if missing:
        raise ParseError(f"missing keys: {sorted(missing)}")
    if not isinstance(doc["name"], str):
        raise ParseError("name must be a string")
    dim = _as_int(doc["dim"], "dim")
    if not isinstance(doc["vertical"], list):
        raise ParseError("vertical must be an array")
    vertical = tuple(_as_int(v, "vertical") for v in doc["vertical"])
    if not isinstance(doc["frame"], list) or not all(isinstance(s, str) for s in doc["frame"]):
        raise ParseError("frame must be an array of strings")
    if not isinstance(doc["brackets"], list):
        raise ParseError("brackets must be an array")
    brackets = []
    for entry in doc["brackets"]:
        if not isinstance(entry, dict) or set(entry) != {"i", "j", "coeffs"}:
            raise ParseError(f"bracket entry must have exactly keys i, j, coeffs: {entry!r}")
        i = _as_int(entry["i"], "bracket i")
        j = _as_int(entry["j"], "bracket j")
        if not isinstance(entry["coeffs"], dict):
            raise ParseError("coeffs must be an object slot -> real")
        coeffs = []
        for slot, value in entry["coeffs"].items():
            try:
                k = int(slot)
            except ValueError:
                raise ParseError(f"bracket slot {slot!r} is not an integer") from None
            if str(k) != slot:
                raise ParseError(f"bracket slot {slot!r} is not canonical")
            coeffs.append((k, _as_real(value, "bracket coefficient")))
        brackets.append((i, j, tuple(coeffs)))
    metric = doc["metric"]
    if metric == "identity":
        g = np.eye(dim) if dim > 0 else np.zeros((0, 0))
    elif isinstance(metric, list):
        if len(metric) != dim * dim:
            raise ParseError(f"metric array must have dim^2 = {dim * dim} entries")
        g = np.array([_as_real(x, "metric entry") for x in metric]).reshape(dim, dim)
    else:
        raise ParseError('metric must be "identity" or a row-major array')
    structure = doc.get("structure")
    if structure is not None and not isinstance(structure, dict):
        raise ParseError("structure must be an object")
    return LieFoliationModel(doc["name"], dim, vertical, tuple(doc["frame"]), tuple(brackets), g, structure)


def load_model(content: bytes | str) -> LieFoliationModel:
    """Parse and validate a model file (UTF-8 JSON)."""
    if isinstance(content, bytes):
        try:
            content = content.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"model file is not UTF-8: {exc}") from None
    try:
        doc = json.loads(content)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    return validate(model_from_dict(doc))


def load_model_file(path) -> LieFoliationModel:
    with open(path, "rb") as fh:
        return load_model(fh.read())


def model_to_dict(model: LieFoliationModel) -> dict:
    g = model.metric
    metric = "identity" if np.array_equal(g, np.eye(model.dim)) else [float(x) for x in g.ravel()]
    doc = {
        "name": model.name,
        "dim": model.dim,
        "vertical": list(model.vertical),
        "frame": list(model.frame),
        "brackets": [
            {"i": i, "j": j, "coeffs": {str(k): float(v) for k, v in coeffs}}
            for i, j, coeffs in model.brackets
        ],
        "metric": metric,
    }
    if model.structure is not None:
        doc["structure"] = model.structure
    return doc


def serialize(model: LieFoliationModel) -> bytes:
    return json.dumps(model_to_dict(model), ensure_ascii=False).encode("utf-8")


# --- built-in families -----------------------------------------------------

def quaternion_units() -> list[np.ndarray]:
    """Left multiplication by i, j, k on H = R^4 (basis 1, i, j, k).

    These satisfy J_a J_b = -delta_ab + eps_abc J_c.
    """
    def left(q):
        a, b, c, d = q
        return np.array([
            [a, -b, -c, -d],
            [b, a, -d, c],
            [c, d, a, -b],
            [d, -c, b, a],
        ], dtype=float)

    return [left((0, 1, 0, 0)), left((0, 0, 1, 0)), left((0, 0, 0, 1))]


def _table(dense: dict) -> tuple:
    """Turn {(i, j): {k: v}} into the sorted sparse bracket table."""
    out = []
    for (i, j) in sorted(dense):
        coeffs = tuple((k, float(v)) for k, v in sorted(dense[(i, j)].items()) if v != 0.0)
        if coeffs:
            out.append((i, j, coeffs))
    return tuple(out)


def from_structure_constants(name: str, c, vertical, metric=None, frame=None) -> LieFoliationModel:
    """Validated model from dense constants ``c[k, i, j]`` (entries below 1e-15 dropped)."""
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    dense = {}
    for i in range(n):
        for j in range(i + 1, n):
            coeffs = {k: c[k, i, j] for k in range(n) if abs(c[k, i, j]) > 1e-15}
            if coeffs:
                dense[(i, j)] = coeffs
    frame = tuple(frame) if frame is not None else tuple(f"e{i + 1}" for i in range(n))
    metric = np.eye(n) if metric is None else np.asarray(metric, dtype=float)
    return validate(LieFoliationModel(name, n, tuple(int(v) for v in vertical), frame, _table(dense), metric))


def _nonzero(values, what):
    for a in values:
        if not np.isfinite(a) or a == 0.0:
            raise BadParams(f"{what} must be finite and nonzero, got {a}")


def _positive_int(value, what):
    if float(value) != int(value) or int(value) < 1:
        raise BadParams(f"{what} must be a positive integer, got {value}")
    return int(value)


def heisenberg(*weights: float) -> LieFoliationModel:
    if not weights:
        raise BadParams("heisenberg needs at least one weight a_k")
    _nonzero(weights, "heisenberg weight")
    n = len(weights)
    xi = 2 * n
    dense = {(2 * k, 2 * k + 1): {xi: 2.0 * a} for k, a in enumerate(weights)}
    frame = tuple(f"e{i + 1}" for i in range(2 * n)) + ("xi",)
    name = "heisenberg:" + ",".join(f"{float(a):g}" for a in weights)
    return validate(LieFoliationModel(name, 2 * n + 1, (xi,), frame, _table(dense), np.eye(2 * n + 1)))


def quat_heisenberg(a: float) -> LieFoliationModel:
    _nonzero([a], "quat_heisenberg weight")
    js = quaternion_units()
    dense = {}
    for x in range(4):
        for y in range(x + 1, 4):
            # [e_x, e_y] = 2a sum_i <J_i e_x, e_y> xi_i
            coeffs = {4 + i: 2.0 * a * js[i][y, x] for i in range(3)}
            dense[(x, y)] = coeffs
    frame = ("e1", "e2", "e3", "e4", "xi1", "xi2", "xi3")
    return validate(LieFoliationModel(f"quat_heisenberg:{float(a):g}", 7, (4, 5, 6), frame, _table(dense), np.eye(7)))


def s_model(n: float, p: float, a: float) -> LieFoliationModel:
    n, p = _positive_int(n, "n"), _positive_int(p, "p")
    _nonzero([a], "s_model weight")
    dim = 2 * n + p
    xis = tuple(range(2 * n, dim))
    dense = {(2 * k, 2 * k + 1): {x: 2.0 * a for x in xis} for k in range(n)}
    frame = tuple(f"e{i + 1}" for i in range(2 * n)) + tuple(f"xi{i + 1}" for i in range(p))
    return validate(LieFoliationModel(f"s_model:{n},{p},{float(a):g}", dim, xis, frame, _table(dense), np.eye(dim)))


def para_model(n: float, p: float) -> LieFoliationModel:
    """Para-S model: D+ = span(e_k), D- = span(f_k), both isotropic, g(e_k, f_k) = 1."""
    n, p = _positive_int(n, "n"), _positive_int(p, "p")
    dim = 2 * n + p
    xis = tuple(range(2 * n, dim))
    dense = {(k, n + k): {x: 2.0 for x in xis} for k in range(n)}
    g = np.zeros((dim, dim))
    g[:n, n:2 * n] = np.eye(n)
    g[n:2 * n, :n] = np.eye(n)
    g[2 * n:, 2 * n:] = np.eye(p)
    frame = tuple(f"e{k + 1}+" for k in range(n)) + tuple(f"e{k + 1}-" for k in range(n)) + tuple(
        f"xi{i + 1}" for i in range(p)
    )
    return validate(LieFoliationModel(f"para_model:{n},{p}", dim, xis, frame, _table(dense), g))


def su2() -> LieFoliationModel:
    dense = {(0, 1): {2: 2.0}, (1, 2): {0: 2.0}, (0, 2): {1: -2.0}}
    return validate(LieFoliationModel("su2", 3, (2,), ("e1", "e2", "e3"), _table(dense), np.eye(3)))


def abelian(dim: int, vertical=None) -> LieFoliationModel:
    """Abelian algebra with identity metric; the last slot is vertical by default."""
    vertical = tuple(vertical) if vertical is not None else (dim - 1,)
    frame = tuple(f"e{i + 1}" for i in range(dim))
    return validate(LieFoliationModel(f"abelian:{dim}", dim, vertical, frame, (), np.eye(dim)))


BUILTINS = {
    "heisenberg": (heisenberg, "a_1,...,a_n", "Sasakian (weak for a_k != 1)"),
    "quat_heisenberg": (quat_heisenberg, "a", "3-Sasakian (weak for a != 1)"),
    "s_model": (s_model, "n,p,a", "S-manifold (weak for a != 1)"),
    "para_model": (para_model, "n,p", "para-S-manifold"),
    "su2": (su2, "", "Sasakian (Hopf fibration of the round S^3)"),
}


def builtin(name: str, params=()) -> LieFoliationModel:
    try:
        factory = BUILTINS[name][0]
    except KeyError:
        raise UnknownModel(f"unknown model family {name!r}; known: {sorted(BUILTINS)}") from None
    params = [float(x) for x in params]
    try:
        return factory(*params)
    except TypeError:
        raise BadParams(f"{name} expects parameters ({BUILTINS[name][1]}), got {params}") from None


def parse_ref(ref: str) -> LieFoliationModel:
    """Resolve a ``name:param,param`` reference to a built-in model."""
    name, _, rest = ref.partition(":")
    try:
        params = [float(x) for x in rest.split(",")] if rest.strip() else []
    except ValueError:
        raise BadParams(f"cannot parse parameters in {ref!r}") from None
    return builtin(name.strip(), params)


# --- compatibility ---------------------------------------------------------

@dataclass(frozen=True)
class CompatibilityReport:
    totally_geodesic: float
    riemannian: float

    @property
    def ok(self) -> bool:
        return self.totally_geodesic <= VALIDATION_TOL and self.riemannian <= VALIDATION_TOL


def check_compatible(model: LieFoliationModel, gamma=None, ft=None) -> CompatibilityReport:
    """Residuals of total geodesy of the leaves and of the bundle-like condition.

    ``gamma`` and ``ft`` may be passed in when already computed for ``model``.
    """
    from .tensor_geometry import foliation_tensors, levi_civita

    gamma = levi_civita(model) if gamma is None else gamma
    v, h = list(model.vertical), list(model.horizontal)
    # (nabla_{xi_i} xi_j) restricted to horizontal components
    tg = float(np.max(np.abs(gamma[np.ix_(h, v, v)]))) if h else 0.0
    ft = foliation_tensors(model, gamma) if ft is None else ft
    rm = max((float(np.max(np.abs(a))) for a in ft.A), default=0.0) if h else 0.0
    return CompatibilityReport(tg, rm)
