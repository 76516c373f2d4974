"""R- and K-matrices of the symmetric/asymmetric exclusion processes and
their s=2 fused versions.

Two spectral-parameter conventions coexist: the symmetric families use an
additive parameter (regular point 0, inversion ``z -> -z``) and the
asymmetric ones a multiplicative parameter (regular point 1, inversion
``z -> 1/z``).  The convention travels on :class:`ModelSpec`; every helper
that combines spectral parameters goes through it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from gmpy2 import mpq

from .tensor import (
    ONE, ZERO, Operator, apply_local, invert, kron, partial_trace_first,
    partial_transpose, to_scalar, _identity, _zeros,
)

FAMILIES = ("ssep", "asep", "fused-ssep", "fused-asep")


class PoleError(ZeroDivisionError):
    """A matrix entry was evaluated at a pole."""


class ConventionError(ValueError):
    """Additive and multiplicative spectral parameters were mixed."""


def _div(num, den):
    if den == 0:
        raise PoleError(f"pole: denominator vanishes (numerator {num})")
    return num / den


@dataclass(frozen=True)
class ModelSpec:
    """Which integrable model, with its parameters.

    ``t`` is only meaningful for the asymmetric families.  ``a, b, c, d`` are
    the boundary rates (left injection/extraction ``a, c``; right extraction/
    injection ``b, d``) and ``kappa`` the staggering parameter.
    """

    family: str
    kappa: object = mpq(1, 2)
    t: object = None
    a: object = ONE
    b: object = ONE
    c: object = ZERO
    d: object = ZERO
    exact: bool = True

    def __post_init__(self):
        fam = self.family.lower().replace("_", "-")
        if fam not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", fam)
        for name in ("kappa", "a", "b", "c", "d"):
            object.__setattr__(self, name, to_scalar(getattr(self, name), self.exact))
        if self.asymmetric:
            if self.t is None:
                raise ValueError(f"family {fam} needs the asymmetry parameter t")
            t = to_scalar(self.t, self.exact)
            if not 0 < t < 1:
                raise ValueError(f"asymmetry parameter must satisfy 0 < t < 1, got {t}")
            object.__setattr__(self, "t", t)
        else:
            object.__setattr__(self, "t", None)

    # -- family bookkeeping --------------------------------------------------
    @property
    def asymmetric(self) -> bool:
        return self.family.endswith("asep")

    @property
    def fused(self) -> bool:
        return self.family.startswith("fused")

    @property
    def s(self) -> int:
        return 2 if self.fused else 1

    @property
    def dim_local(self) -> int:
        return self.s + 1

    @property
    def additive(self) -> bool:
        return not self.asymmetric

    @property
    def convention(self) -> str:
        return "additive" if self.additive else "multiplicative"

    def fundamental(self) -> "ModelSpec":
        """The s=1 model the fused one is built from (self if already s=1)."""
        if not self.fused:
            return self
        return replace(self, family=self.family[len("fused-"):])

    def fusion(self) -> "ModelSpec":
        if self.fused:
            return self
        return replace(self, family="fused-" + self.family)

    def with_params(self, **kw) -> "ModelSpec":
        return replace(self, **kw)

    def scalar(self, x):
        return to_scalar(x, self.exact)

    # -- spectral parameter arithmetic ---------------------------------------
    @property
    def regular(self):
        return self.scalar(0 if self.additive else 1)

    def ratio(self, z1, z2):
        """Argument of R_12 in the Yang-Baxter equation: z1-z2 or z1/z2."""
        return z1 - z2 if self.additive else _div(z1, z2)

    def compose(self, z1, z2):
        """z1+z2 or z1*z2, the reflected argument."""
        return z1 + z2 if self.additive else z1 * z2

    def inverse(self, z):
        return -z if self.additive else _div(self.scalar(1), z)

    def double(self, z):
        return 2 * z if self.additive else z * z

    def fusion_shifts(self, z):
        """(minus, plus) shifted arguments used by fusion: z -+ 1/2 or z/t, zt."""
        if self.additive:
            half = self.scalar(mpq(1, 2))
            return z - half, z + half
        return _div(z, self.t), z * self.t

    @property
    def projector_point(self):
        return self.scalar(1) if self.additive else self.t ** 2

    def staggered(self):
        """(kappa, its inverse): the two alternating spectral arguments."""
        return self.kappa, self.inverse(self.kappa)

    def label(self) -> str:
        parts = [self.family, f"kappa={self.kappa}"]
        if self.asymmetric:
            parts.append(f"t={self.t}")
        parts += [f"a={self.a}", f"b={self.b}", f"c={self.c}", f"d={self.d}"]
        return ",".join(str(p) for p in parts)

    def params_dict(self) -> dict:
        from .tensor import scalar_to_json
        out = {"family": self.family, "kappa": scalar_to_json(self.kappa)}
        if self.asymmetric:
            out["t"] = scalar_to_json(self.t)
        for k in "abcd":
            out[k] = scalar_to_json(getattr(self, k))
        return out


def _require_convention(model: ModelSpec, additive: bool):
    if model.additive != additive:
        raise ConventionError(f"{model.family} uses the {model.convention} convention")


def _op(rows, model: ModelSpec, dim_local: int | None = None) -> Operator:
    d = model.dim_local if dim_local is None else dim_local
    arr = np.array(rows, dtype=object)
    if not model.exact:
        arr = arr.astype(float)
    return Operator(arr, d, exact=model.exact)


def _complete_diagonal(rows, model):
    """Fill ``None`` diagonal entries so every column sums to one."""
    n = len(rows)
    one = model.scalar(1)
    for j in range(n):
        if rows[j][j] is None:
            rows[j][j] = one - sum(rows[i][j] for i in range(n) if i != j)
    return rows


# --------------------------------------------------------------------------
# fundamental (s=1) matrices
# --------------------------------------------------------------------------

def _ssep_r(z, model):
    o, n = model.scalar(1), model.scalar(0)
    den = z + 1
    p, q = _div(z, den), _div(o, den)
    return [[o, n, n, n], [n, p, q, n], [n, q, p, n], [n, n, n, o]]


def _asep_r(z, t2, model):
    o, n = model.scalar(1), model.scalar(0)
    den = 1 - t2 * z
    return [[o, n, n, n],
            [n, _div((1 - z) * t2, den), _div(z * (1 - t2), den), n],
            [n, _div(1 - t2, den), _div(1 - z, den), n],
            [n, n, n, o]]


def _ssep_k(z, m):
    a, c = m.a, m.c
    den = (a + c) * z + 1
    return [[_div((c - a) * z + 1, den), _div(2 * c * z, den)],
            [_div(2 * a * z, den), _div((a - c) * z + 1, den)]]


def _ssep_kbar(z, m):
    b, d = m.b, m.d
    den = (b + d) * z - 1
    return [[_div((b - d) * z - 1, den), _div(2 * b * z, den)],
            [_div(2 * d * z, den), _div((d - b) * z - 1, den)]]


def _asep_k(z, m):
    a, c = m.a, m.c
    den = c * z * z + z - a
    return [[_div((c - a) * z * z + z, den), _div(c * (z * z - 1), den)],
            [_div(a * (z * z - 1), den), _div(c - a + z, den)]]


def _asep_kbar(z, m):
    b, d = m.b, m.d
    den = b * z * z - z - d
    return [[_div((b - d) * z * z - z, den), _div(b * (z * z - 1), den)],
            [_div(d * (z * z - 1), den), _div(b - d - z, den)]]


# --------------------------------------------------------------------------
# explicit fused (s=2) matrices
# --------------------------------------------------------------------------

def _fused_ssep_r(z, m):
    o, n = m.scalar(1), m.scalar(0)
    d1 = z + 2
    d2 = (z + 1) * (z + 2)
    if d1 == 0 or d2 == 0:
        raise PoleError(f"fused SSEP R-matrix has a pole at z={z}")
    A, B = z / d1, 2 / d1
    C, F, G = z * (z - 1) / d2, z / d2, 2 / d2
    H, J = 4 * z / d2, (z * z + z + 2) / d2
    return [
        [o, n, n, n, n, n, n, n, n],
        [n, A, n, B, n, n, n, n, n],
        [n, n, C, n, F, n, G, n, n],
        [n, B, n, A, n, n, n, n, n],
        [n, n, H, n, J, n, H, n, n],
        [n, n, n, n, n, A, n, B, n],
        [n, n, G, n, F, n, C, n, n],
        [n, n, n, n, n, B, n, A, n],
        [n, n, n, n, n, n, n, n, o],
    ]


def _fused_asep_r(z, m):
    o, n = m.scalar(1), m.scalar(0)
    t = m.t
    t2, t4, t6 = t ** 2, t ** 4, t ** 6
    p4 = 1 - z * t4
    p2 = 1 - z * t2
    if p4 == 0 or p2 == 0:
        raise PoleError(f"fused ASEP R-matrix has a pole at z={z}")
    dd = p2 * p4
    r11 = t4 * (1 - z) / p4
    r13 = z * (1 - t4) / p4
    r31 = (1 - t4) / p4
    r33 = (1 - z) / p4
    e22 = t6 * (t2 - z) * (1 - z) / dd
    e24 = z * t4 * (1 - t2) * (1 - z) / dd
    e26 = z * z * (1 - t2) * (1 - t4) / dd
    e42 = t2 * (1 + t2) * (1 - t4) * (1 - z) / dd
    e44 = (z * t6 + z * z * t4 - 2 * z * t4 - 2 * z * t2 + t2 + z) / dd
    e46 = z * (1 - z) * (1 + t2) * (1 - t4) / (t2 * dd)
    e62 = (1 - t2) * (1 - t4) / dd
    e64 = (1 - z) * (1 - t2) / dd
    e66 = (t2 - z) * (1 - z) / (t2 * dd)
    return [
        [o, n, n, n, n, n, n, n, n],
        [n, r11, n, r13, n, n, n, n, n],
        [n, n, e22, n, e24, n, e26, n, n],
        [n, r31, n, r33, n, n, n, n, n],
        [n, n, e42, n, e44, n, e46, n, n],
        [n, n, n, n, n, r11, n, r13, n],
        [n, n, e62, n, e64, n, e66, n, n],
        [n, n, n, n, n, r31, n, r33, n],
        [n, n, n, n, n, n, n, n, o],
    ]


def _fused_ssep_k(z, m):
    a, c = m.a, m.c
    den = ((2 * z - 1) * (a + c) + 2) * ((2 * z + 1) * (a + c) + 2)
    if den == 0:
        raise PoleError(f"fused SSEP K-matrix has a pole at z={z}")
    u = (2 * z - 1) * (c - a) + 2
    v = (2 * z - 1) * (a - c) + 2
    rows = [
        [None, 4 * c * z * u / den, 8 * c * c * z * (2 * z - 1) / den],
        [8 * a * z * u / den, None, 8 * c * z * v / den],
        [8 * a * a * z * (2 * z - 1) / den, 4 * a * z * v / den, None],
    ]
    return _complete_diagonal(rows, m)


def _fused_ssep_kbar(z, m):
    b, d = m.b, m.d
    den = ((2 * z - 1) * (b + d) - 2) * ((2 * z + 1) * (b + d) - 2)
    if den == 0:
        raise PoleError(f"fused SSEP Kbar-matrix has a pole at z={z}")
    u = (2 * z + 1) * (b - d) - 2
    v = (2 * z + 1) * (d - b) - 2
    rows = [
        [None, 4 * b * z * u / den, 8 * b * b * z * (2 * z + 1) / den],
        [8 * d * z * u / den, None, 8 * b * z * v / den],
        [8 * d * d * z * (2 * z + 1) / den, 4 * d * z * v / den, None],
    ]
    return _complete_diagonal(rows, m)


def _fused_asep_k(z, m):
    a, c, t = m.a, m.c, m.t
    t2, z2 = t * t, z * z
    den = (a * t2 - c * z2 - z * t) * (a - c * t2 * z2 - z * t)
    if den == 0:
        raise PoleError(f"fused ASEP K-matrix has a pole at z={z}")
    u = a * z - c * z - t
    v = a * t - c * t - z
    rows = [
        [None, c * t2 * z * (1 - z2) * u / den, c * c * t2 * (t2 - z2) * (1 - z2) / den],
        [a * (1 + t2) * z * (1 - z2) * u / den, None, c * t * (1 + t2) * (1 - z2) * v / den],
        [a * a * (t2 - z2) * (1 - z2) / den, a * t * (1 - z2) * v / den, None],
    ]
    return _complete_diagonal(rows, m)


def _fused_asep_kbar(z, m):
    b, d, t = m.b, m.d, m.t
    t2, z2 = t * t, z * z
    den = (b * z2 - d * t2 - z * t) * (b * t2 * z2 - d - z * t)
    if den == 0:
        raise PoleError(f"fused ASEP Kbar-matrix has a pole at z={z}")
    u = 1 + d * z * t - b * z * t
    v = d - b + z * t
    rows = [
        [None, b * t * z * (1 - z2) * u / den, b * b * (1 - z2) * (1 - t2 * z2) / den],
        [d * t * (1 + t2) * z * (1 - z2) * u / den, None, b * (1 + t2) * (1 - z2) * v / den],
        [d * d * t2 * (1 - z2) * (1 - t2 * z2) / den, d * t2 * (1 - z2) * v / den, None],
    ]
    return _complete_diagonal(rows, m)


# --------------------------------------------------------------------------
# public constructors
# --------------------------------------------------------------------------

def r_matrix(model: ModelSpec, z) -> Operator:
    """R(z) on two sites, explicit entries for the family."""
    z = model.scalar(z)
    fam = model.family
    if fam == "ssep":
        rows = _ssep_r(z, model)
    elif fam == "asep":
        rows = _asep_r(z, model.t ** 2, model)
    elif fam == "fused-ssep":
        rows = _fused_ssep_r(z, model)
    else:
        rows = _fused_asep_r(z, model)
    return _op(rows, model)


def r_check(model: ModelSpec, z) -> Operator:
    """The braid-like form P R(z)."""
    return Operator.permutation(model.dim_local, model.exact) @ r_matrix(model, z)


def r21(model: ModelSpec, z) -> Operator:
    """R_21(z) = P R_12(z) P."""
    p = Operator.permutation(model.dim_local, model.exact)
    return p @ r_matrix(model, z) @ p


def k_left(model: ModelSpec, z) -> Operator:
    z = model.scalar(z)
    fn = {"ssep": _ssep_k, "asep": _asep_k,
          "fused-ssep": _fused_ssep_k, "fused-asep": _fused_asep_k}[model.family]
    return _op(fn(z, model), model)


def k_right(model: ModelSpec, z) -> Operator:
    z = model.scalar(z)
    fn = {"ssep": _ssep_kbar, "asep": _asep_kbar,
          "fused-ssep": _fused_ssep_kbar, "fused-asep": _fused_asep_kbar}[model.family]
    return _op(fn(z, model), model)


def k_dual(model: ModelSpec, z) -> Operator:
    """Dual boundary matrix Ktilde(z) entering the open transfer matrix.

    Ktilde_1(z) = tr_0( Kbar_0(z^-1) ((R_01(z^2)^{t_1})^{-1})^{t_1} P_01 ),
    with z^-1 -> -z and z^2 -> 2z in the additive convention.
    """
    z = model.scalar(z)
    d = model.dim_local
    r = r_matrix(model, model.double(z))
    rt = partial_transpose(invert(partial_transpose(r, 2)), 2)
    kb = kron(k_right(model, model.inverse(z)), Operator.identity(d, 1, model.exact))
    p = Operator.permutation(d, model.exact)
    return partial_trace_first(kb @ rt @ p)


def k_right_from_dual(model: ModelSpec, ktilde_of, z) -> Operator:
    """Rebuild Kbar(z) = tr_0( Ktilde_0(z^-1) R_01(z^-2) P_01 ).

    ``ktilde_of`` maps a spectral argument to the dual matrix.
    """
    z = model.scalar(z)
    d = model.dim_local
    zi = model.inverse(z)
    kt = kron(ktilde_of(zi), Operator.identity(d, 1, model.exact))
    r = r_matrix(model, model.double(zi))
    p = Operator.permutation(d, model.exact)
    return partial_trace_first(kt @ r @ p)


# --------------------------------------------------------------------------
# fusion
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FusionProjectors:
    """Rectangular maps between C^2 (x) C^2 and its 3-dim invariant subspace."""

    q_left: np.ndarray = field(repr=False)
    q_right: np.ndarray = field(repr=False)
    mu: object = None


def fusion_projectors(model: ModelSpec) -> FusionProjectors:
    base = model.fundamental()
    x = base.scalar
    o, n = x(1), x(0)
    ql = np.array([[o, n, n, n], [n, o, o, n], [n, n, n, o]], dtype=object)
    if base.additive:
        lo, hi = x(mpq(1, 2)), x(mpq(1, 2))
    else:
        t2 = base.t ** 2
        lo, hi = t2 / (1 + t2), o / (1 + t2)
    qr = np.array([[o, n, n], [n, lo, n], [n, hi, n], [n, n, o]], dtype=object)
    if not base.exact:
        ql, qr = ql.astype(float), qr.astype(float)
    return FusionProjectors(ql, qr, base.projector_point)


def _sandwich(ql, x, qr):
    return ql.dot(x).dot(qr)


def _half_fused_r(base: ModelSpec, z, proj: FusionProjectors) -> np.ndarray:
    """R_{i,<jk>}(z) on C^2 (x) C^3: Q_jk^l R_ij(z-) R_ik(z+) Q_jk^r."""
    zm, zp = base.fusion_shifts(z)
    dims = [2, 2, 2]
    x = _identity(8, base.exact)
    x = apply_local(r_matrix(base, zp).data, [0, 2], dims, x)
    x = apply_local(r_matrix(base, zm).data, [0, 1], dims, x)
    eye2 = _identity(2, base.exact)
    return _sandwich(np.kron(eye2, proj.q_left), x, np.kron(eye2, proj.q_right))


def fuse_r(model: ModelSpec, z) -> Operator:
    """9x9 fused R-matrix built only from R(z) and the projectors."""
    base = model.fundamental()
    z = base.scalar(z)
    proj = fusion_projectors(base)
    zm, zp = base.fusion_shifts(z)
    # first space fused with the shifts in the opposite order
    dims = [2, 2, 3]
    x = _identity(12, base.exact)
    x = apply_local(_half_fused_r(base, zm, proj), [1, 2], dims, x)
    x = apply_local(_half_fused_r(base, zp, proj), [0, 2], dims, x)
    eye3 = _identity(3, base.exact)
    out = _sandwich(np.kron(proj.q_left, eye3), x, np.kron(proj.q_right, eye3))
    return Operator(out, 3, 2, base.exact)


def _fuse_boundary(model: ModelSpec, z, kfun, invert_r: bool) -> Operator:
    base = model.fundamental()
    z = base.scalar(z)
    proj = fusion_projectors(base)
    zm, zp = base.fusion_shifts(z)
    dims = [2, 2]
    rji = r_matrix(base, base.double(z))
    if invert_r:
        rji = invert(rji)
    x = _identity(4, base.exact)
    x = apply_local(kfun(base, zp).data, [1], dims, x)
    x = apply_local(rji.data, [1, 0], dims, x)
    x = apply_local(kfun(base, zm).data, [0], dims, x)
    return Operator(_sandwich(proj.q_left, x, proj.q_right), 3, 1, base.exact)


def fuse_k(model: ModelSpec, z) -> Operator:
    """Fused left K: Q^l K_i(z-) R_ji(2z or z^2) K_j(z+) Q^r."""
    return _fuse_boundary(model, z, k_left, invert_r=False)


def fuse_k_bar(model: ModelSpec, z) -> Operator:
    """Fused right K: Q^l Kbar_i(z-) R_ji(2z or z^2)^-1 Kbar_j(z+) Q^r."""
    return _fuse_boundary(model, z, k_right, invert_r=True)


def ssep_limit_check(z, h) -> float:
    """max |R_ASEP(e^{hz})|_{t^2=e^h} - R_SSEP(z)| in floating point."""
    z, h = float(z), float(h)
    dummy = ModelSpec("ssep", exact=False)
    asep = np.array(_asep_r(math.exp(h * z), math.exp(h), dummy), dtype=float)
    ssep = np.array(_ssep_r(z, dummy), dtype=float)
    return float(np.abs(asep - ssep).max())
