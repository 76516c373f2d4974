"""Matrix product ansatz over the quadratic algebras

    symmetric:   DE - ED = D + E,        <W|(aE - cD - 1) = 0,  (bD - dE - 1)|V> = 0
    asymmetric:  de - t^2 ed = 1 - t^2,  <W|(ae - cd + 1) = 0,  (bd - de + 1)|V> = 0

Words are strings over the two generators.  The normal order puts the
"E"-role letter (E or e) left of the "D"-role letter, so a normal form is a
combination of words ``E^m D^n``.  Scalars ``<W|E^m D^n|V>`` are obtained by
solving the linear system implied by the boundary relations, with
``<W|V> = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .chain import ChainSpec, build_floquet, configurations, validate_parameters
from .kernels import ModelSpec, PoleError, fusion_projectors, k_left, k_right, r_check
from .reports import PropertyReport
from .stationary import StationaryState
from .tensor import ONE, ZERO, solve_exact, to_scalar

SYMMETRIC, ASYMMETRIC = "symmetric", "asymmetric"
LETTERS = {SYMMETRIC: ("E", "D"), ASYMMETRIC: ("e", "d")}


class AlphabetError(ValueError):
    pass


class ClosureError(ArithmeticError):
    """The boundary-closure system is inconsistent or underdetermined."""


def alphabet_of(model: ModelSpec) -> str:
    return ASYMMETRIC if model.asymmetric else SYMMETRIC


# --------------------------------------------------------------------------
# noncommutative polynomials
# --------------------------------------------------------------------------

class NCPolynomial:
    """Finite linear combination of words in two noncommuting generators."""

    __slots__ = ("alphabet", "terms")

    def __init__(self, alphabet: str, terms=None):
        if alphabet not in LETTERS:
            raise AlphabetError(f"unknown alphabet {alphabet!r}")
        self.alphabet = alphabet
        letters = set(LETTERS[alphabet])
        clean = {}
        for word, coeff in (terms or {}).items():
            if set(word) - letters:
                raise AlphabetError(f"word {word!r} is not over {sorted(letters)}")
            if coeff != 0:
                clean[word] = clean.get(word, 0) + coeff
        self.terms = {w: c for w, c in clean.items() if c != 0}

    @classmethod
    def constant(cls, alphabet, c):
        return cls(alphabet, {"": c})

    @classmethod
    def generator(cls, alphabet, which: str, coeff=ONE):
        return cls(alphabet, {which: coeff})

    @property
    def letters(self):
        return LETTERS[self.alphabet]

    def degree(self) -> int:
        return max((len(w) for w in self.terms), default=-1)

    def is_zero(self) -> bool:
        return not self.terms

    def is_normal(self) -> bool:
        e, d = self.letters
        return all(d + e not in w for w in self.terms)

    def _check(self, other):
        if other.alphabet != self.alphabet:
            raise AlphabetError("cannot combine polynomials over different alphabets")

    def _coerce(self, other):
        if isinstance(other, NCPolynomial):
            self._check(other)
            return other
        return NCPolynomial.constant(self.alphabet, other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out.get(w, 0) + c
        return NCPolynomial(self.alphabet, out)

    __radd__ = __add__

    def __neg__(self):
        return NCPolynomial(self.alphabet, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, NCPolynomial):
            return NCPolynomial(self.alphabet, {w: c * other for w, c in self.terms.items()})
        self._check(other)
        out = {}
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                w = w1 + w2
                out[w] = out.get(w, 0) + c1 * c2
        return NCPolynomial(self.alphabet, out)

    def __rmul__(self, other):
        return NCPolynomial(self.alphabet, {w: other * c for w, c in self.terms.items()})

    def __pow__(self, n: int):
        out = NCPolynomial.constant(self.alphabet, ONE)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, NCPolynomial):
            return self.alphabet == other.alphabet and self.terms == other.terms
        return self == self._coerce(other)

    __hash__ = None

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for w in sorted(self.terms, key=lambda w: (len(w), w)):
            parts.append(f"({self.terms[w]})" + (f"*{w}" if w else ""))
        return " + ".join(parts)


# --------------------------------------------------------------------------
# rewriting
# --------------------------------------------------------------------------

def rewrite_rule(model: ModelSpec):
    """The single rewrite ``DE -> ...`` (or ``de -> ...``) as (lhs, [(coeff, word)])."""
    if model.asymmetric:
        t2 = model.t ** 2
        return "de", [(t2, "ed"), (1 - t2, "")]
    one = model.scalar(1)
    return "DE", [(one, "ED"), (one, "D"), (one, "E")]


@lru_cache(maxsize=None)
def _normal_word(word: str, lhs: str, rhs: tuple):
    i = word.find(lhs)
    if i < 0:
        return ((word, None),)
    out = {}
    for c, w in rhs:
        for nw, nc in _normal_word(word[:i] + w + word[i + 2:], lhs, rhs):
            coeff = c if nc is None else c * nc
            out[nw] = out.get(nw, 0) + coeff
    return tuple((w, c) for w, c in out.items() if c != 0)


def normal_form(p: NCPolynomial, model: ModelSpec) -> NCPolynomial:
    """Rewrite ``p`` until every E-role letter precedes every D-role letter."""
    if p.alphabet != alphabet_of(model):
        raise AlphabetError(f"{p.alphabet} polynomial used with the {model.family} algebra")
    lhs, rhs = rewrite_rule(model)
    rhs = tuple(rhs)
    out = {}
    for w, c in p.terms.items():
        for nw, nc in _normal_word(w, lhs, rhs):
            out[nw] = out.get(nw, 0) + (c if nc is None else c * nc)
    return NCPolynomial(p.alphabet, out)


def normal_word(m: int, n: int, alphabet: str) -> str:
    e, d = LETTERS[alphabet]
    return e * m + d * n


def normal_basis(max_degree: int, alphabet: str):
    return [normal_word(m, k - m, alphabet) for k in range(max_degree + 1) for m in range(k, -1, -1)]


# --------------------------------------------------------------------------
# ansatz vectors
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MPAVector:
    components: tuple
    z: object

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]


def _fundamental_a(model: ModelSpec, z):
    alpha = alphabet_of(model)
    e, d = LETTERS[alpha]
    E = NCPolynomial.generator(alpha, e, model.scalar(1))
    D = NCPolynomial.generator(alpha, d, model.scalar(1))
    if model.asymmetric:
        if z == 0:
            raise PoleError("ansatz vector has a pole at z=0")
        return (E + z, D + model.scalar(1) / z)
    return (E - z, D + z)


def a_vector(model: ModelSpec, z) -> MPAVector:
    """A(z); for fused models Q^l (A(z-) (x) A(z+)) built from the s=1 vector."""
    z = model.scalar(z)
    if not model.fused:
        return MPAVector(_fundamental_a(model, z), z)
    base = model.fundamental()
    zm, zp = base.fusion_shifts(z)
    a1, a2 = _fundamental_a(base, zm), _fundamental_a(base, zp)
    pair = [a1[i] * a2[j] for i in range(2) for j in range(2)]
    ql = fusion_projectors(base).q_left
    comps = []
    for row in ql:
        acc = NCPolynomial(alphabet_of(model))
        for coeff, poly in zip(row, pair):
            if coeff != 0:
                acc = acc + poly * coeff
        comps.append(normal_form(acc, model))
    return MPAVector(tuple(comps), z)


def sum_vector(vec: MPAVector) -> NCPolynomial:
    """C(z) = <sigma| A(z), the sum of the components."""
    out = vec.components[0]
    for c in vec.components[1:]:
        out = out + c
    return out


def _apply_matrix(mat, polys, model):
    out = []
    for row in mat:
        acc = NCPolynomial(alphabet_of(model))
        for coeff, p in zip(row, polys):
            if coeff != 0:
                acc = acc + p * coeff
        out.append(normal_form(acc, model))
    return out


def _report(check, model, point, bad):
    return PropertyReport(check, model.family, bad is None, point, model.params_dict(),
                          0.0 if bad is None else None, bad)


def check_zf(model: ModelSpec, z1, z2) -> PropertyReport:
    """P R(z1/z2) A(z1) (x) A(z2) = A(z2) (x) A(z1), componentwise in the algebra."""
    z1, z2 = model.scalar(z1), model.scalar(z2)
    a1, a2 = a_vector(model, z1), a_vector(model, z2)
    n = len(a1)
    left = [a1[i] * a2[j] for i in range(n) for j in range(n)]
    right = [normal_form(a2[i] * a1[j], model) for i in range(n) for j in range(n)]
    rc = r_check(model, model.ratio(z1, z2)).data
    lhs = _apply_matrix(rc, left, model)
    bad = None
    for k, (x, y) in enumerate(zip(lhs, right)):
        diff = x - y
        if not diff.is_zero():
            bad = f"component {k}: residual {diff!r}"
            break
    return _report("zf", model, {"z1": z1, "z2": z2}, bad)


def boundary_element(model: ModelSpec, side: str) -> NCPolynomial:
    """X with <W|X = 0 (left) or Y with Y|V> = 0 (right)."""
    alpha = alphabet_of(model)
    e, d = LETTERS[alpha]
    one = model.scalar(1)
    sign = one if model.asymmetric else -one
    if side == "left":
        return NCPolynomial(alpha, {e: model.a, d: -model.c, "": sign})
    if side == "right":
        return NCPolynomial(alpha, {d: model.b, e: -model.d, "": sign})
    raise ValueError("side must be 'left' or 'right'")


def ideal_membership(p: NCPolynomial, gen: NCPolynomial, side: str, model: ModelSpec):
    """Multipliers ``w`` with p = gen*w (left) or p = w*gen (right), or None.

    Multipliers range over normal words of degree < deg(p); the algebras here
    have no zero divisors in their associated graded ring, so this bound is
    complete.
    """
    p = normal_form(p, model)
    if p.is_zero():
        return {}
    deg = p.degree()
    if deg < 1:
        return None
    mults = normal_basis(deg - 1, p.alphabet)
    basis = normal_basis(deg, p.alphabet)
    index = {w: i for i, w in enumerate(basis)}
    cols = []
    for w in mults:
        mono = NCPolynomial(p.alphabet, {w: ONE})
        prod = normal_form(gen * mono if side == "left" else mono * gen, model)
        col = [ZERO] * len(basis)
        for word, c in prod.terms.items():
            col[index[word]] = c
        cols.append(col)
    a = np.array(cols, dtype=object).T
    rhs = np.array([p.terms.get(w, ZERO) for w in basis], dtype=object)
    x, _, ok = solve_exact(a, rhs)
    if not ok:
        return None
    return {w: c for w, c in zip(mults, x) if c != 0}


def check_gz(model: ModelSpec, z, side: str = "left") -> PropertyReport:
    """<W|(K(z) A(z^-1) - A(z)) = 0 or (Kbar(z) A(z^-1) - A(z))|V> = 0.

    Verified as exact membership of every component in the one-sided ideal
    generated by the boundary relation.
    """
    z = model.scalar(z)
    k = (k_left if side == "left" else k_right)(model, z).data
    a_inv, a = a_vector(model, model.inverse(z)), a_vector(model, z)
    lhs = _apply_matrix(k, list(a_inv.components), model)
    gen = boundary_element(model, side)
    bad = None
    for i, (x, y) in enumerate(zip(lhs, a.components)):
        if ideal_membership(x - y, gen, side, model) is None:
            bad = f"component {i} not in the {side} boundary ideal"
            break
    return _report(f"gz_{side}", model, {"z": z}, bad)


# --------------------------------------------------------------------------
# boundary closure and scalar evaluation
# --------------------------------------------------------------------------

@dataclass
class BoundaryClosure:
    """Scalars f(m, n) = <W|E^m D^n|V> for m + n <= n_max, with f(0,0) = 1."""

    model: ModelSpec
    n_max: int
    values: dict = field(repr=False)
    rank: int = 0
    n_equations: int = 0
    consistent: bool = True

    def __call__(self, m: int, n: int):
        return self.values[(m, n)]


def boundary_closure(model: ModelSpec, n_max: int) -> BoundaryClosure:
    """Solve the boundary relations for all <W|E^m D^n|V>, exactly."""
    if not model.exact:
        raise TypeError("the boundary closure is computed in exact arithmetic only")
    if not (model.a > 0 and model.b > 0):
        raise ClosureError("boundary reductions need a > 0 and b > 0")
    alpha = alphabet_of(model)
    e, d = LETTERS[alpha]
    unknowns = [(m, k - m) for k in range(n_max + 1) for m in range(k + 1)]
    index = {u: i for i, u in enumerate(unknowns)}
    one = model.scalar(1)
    # <W|E = (c <W|D + s <W|)/a ; D|V> = (d E|V> + s |V>)/b, s = +1 symmetric, -1 asymmetric
    s = -one if model.asymmetric else one
    rows, rhs = [], []

    def row_from(poly, scale):
        vec = {}
        for w, c in normal_form(poly, model).terms.items():
            mm = len(w) - len(w.lstrip(e))
            key = index[(mm, len(w) - mm)]
            vec[key] = vec.get(key, 0) + c * scale
        return vec

    def add(eq):
        row = [ZERO] * len(unknowns)
        for k, v in eq.items():
            row[k] = row[k] + v
        rows.append(row)
        rhs.append(ZERO)

    norm = [ZERO] * len(unknowns)
    norm[index[(0, 0)]] = one
    rows.append(norm)
    rhs.append(one)
    for (m, n) in unknowns:
        if m >= 1:
            eq = {index[(m, n)]: one}
            tail = NCPolynomial(alpha, {normal_word(m - 1, n, alpha): one})
            for k, v in row_from(NCPolynomial(alpha, {d: one}) * tail, -model.c / model.a).items():
                eq[k] = eq.get(k, 0) + v
            for k, v in row_from(tail, -s / model.a).items():
                eq[k] = eq.get(k, 0) + v
            add(eq)
        if n >= 1:
            eq = {index[(m, n)]: one}
            head = NCPolynomial(alpha, {normal_word(m, n - 1, alpha): one})
            for k, v in row_from(head * NCPolynomial(alpha, {e: one}), -model.d / model.b).items():
                eq[k] = eq.get(k, 0) + v
            for k, v in row_from(head, -s / model.b).items():
                eq[k] = eq.get(k, 0) + v
            add(eq)
    a = np.array(rows, dtype=object)
    x, rank, ok = solve_exact(a, np.array(rhs, dtype=object))
    if not ok:
        raise ClosureError("boundary relations are inconsistent at this parameter point")
    if rank != len(unknowns):
        raise ClosureError(f"boundary relations leave {len(unknowns) - rank} scalars undetermined")
    values = {u: x[i] for i, u in enumerate(unknowns)}
    return BoundaryClosure(model, n_max, values, rank, len(rows), True)


def scalar_eval(p: NCPolynomial, closure: BoundaryClosure):
    """<W| p |V> using the closure scalars."""
    model = closure.model
    p = normal_form(p, model)
    if p.degree() > closure.n_max:
        raise ValueError(f"degree {p.degree()} exceeds closure degree {closure.n_max}")
    e = LETTERS[p.alphabet][0]
    total = model.scalar(0)
    for w, c in p.terms.items():
        m = len(w) - len(w.lstrip(e))
        total += c * closure(m, len(w) - m)
    return total


# --------------------------------------------------------------------------
# stationary state
# --------------------------------------------------------------------------

def _staggered_args(model: ModelSpec, L: int, swapped: bool):
    kappa, kinv = model.staggered()
    first, second = (kinv, kappa) if swapped else (kappa, kinv)
    return [first if i % 2 == 0 else second for i in range(L)]


def mpa_weights(model: ModelSpec, L: int, closure: BoundaryClosure, swapped: bool = False):
    """Unnormalised weights <W| A_{tau_1}(z_1) ... A_{tau_L}(z_L) |V> in basis order."""
    vecs = [a_vector(model, z) for z in _staggered_args(model, L, swapped)]
    alpha = alphabet_of(model)
    layer = {(): NCPolynomial.constant(alpha, model.scalar(1))}
    for vec in vecs:
        nxt = {}
        for prefix, poly in layer.items():
            for tau, comp in enumerate(vec.components):
                nxt[prefix + (tau,)] = normal_form(poly * comp, model)
        layer = nxt
    return [scalar_eval(layer[cfg], closure) for cfg in configurations(L, model.s)]


def default_closure_degree(model: ModelSpec, L: int) -> int:
    return model.s * L + 2


def mpa_stationary(chain: ChainSpec, closure: BoundaryClosure | None = None, check_phases: bool = True):
    """Matrix-product stationary state |S> and its companion |S'>.

    Returns ``(S, S_prime, Z_L)``.  With ``check_phases`` the half-step
    identities Uo|S> = |S'> and Ue|S'> = |S> are asserted exactly.
    """
    if not chain.is_open:
        raise ValueError("the matrix product state is built for open chains only")
    model, L = chain.model, chain.L
    rep = validate_parameters(model)
    if not rep.mpa_ready:
        raise ValueError(f"parameters not admissible for the matrix ansatz: {rep.summary()}")
    if closure is None:
        closure = boundary_closure(model, default_closure_degree(model, L))
    w = mpa_weights(model, L, closure)
    wp = mpa_weights(model, L, closure, swapped=True)
    z = sum(w)
    zp = sum(wp)
    if z != zp:
        raise ArithmeticError("the two Floquet phases have different normalisations")
    # the overall sign of <W|..|V> is a convention; only relative signs matter.
    # Zero weights are legitimate only where some generic move is switched off.
    floor = (lambda v: v < 0) if rep.degenerate else (lambda v: v <= 0)
    if z == 0 or any(floor(v / z) for v in w) or any(floor(v / z) for v in wp):
        raise ArithmeticError("non-positive stationary weight")
    s = StationaryState(np.array([v / z for v in w], dtype=object), model.dim_local, L, "S", "mpa")
    sp = StationaryState(np.array([v / z for v in wp], dtype=object), model.dim_local, L, "S'", "mpa")
    if check_phases:
        ops = build_floquet(chain)
        if list(ops.u_odd @ s.probabilities) != list(sp.probabilities):
            raise ArithmeticError("Uo|S> != |S'>")
        if list(ops.u_even @ sp.probabilities) != list(s.probabilities):
            raise ArithmeticError("Ue|S'> != |S>")
    return s, sp, z
