"""Dense operators on tensor powers of a small local space.

Two scalar fields are supported and threaded through every constructor:

* exact rationals (``gmpy2.mpq`` stored in numpy ``object`` arrays), closed
  under the field operations and always in lowest terms;
* double precision floats, compared with an absolute tolerance.

Operators use the column-action convention: ``op @ p`` evolves a probability
column vector ``p``, and a stochastic operator has unit column sums.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Number
from typing import Iterable, Sequence

import numpy as np
from gmpy2 import mpq

FLOAT_ATOL = 1e-12
INVERSE_RESIDUAL = 1e-10

ZERO = mpq(0)
ONE = mpq(1)


class FieldMismatchError(TypeError):
    """Raised when exact and floating operators are combined."""


class SingularMatrixError(ArithmeticError):
    """Raised by :func:`invert` and friends on a singular matrix."""

    def __init__(self, msg, pivot=None):
        super().__init__(msg)
        self.pivot = pivot


# --------------------------------------------------------------------------
# scalars
# --------------------------------------------------------------------------

def to_scalar(x, exact: bool = True):
    """Coerce ``x`` into the requested field.

    Exact mode accepts ints, ``Fraction``, ``mpq`` and ``"p/q"`` strings;
    floats are refused there, since they would silently break exactness.
    """
    if exact:
        if isinstance(x, float):
            raise TypeError(f"refusing float {x!r} in exact mode; pass 'p/q'")
        if isinstance(x, Fraction):
            return mpq(x.numerator, x.denominator)
        if isinstance(x, str):
            return mpq(x.strip())
        return mpq(x)
    if isinstance(x, str):
        return float(Fraction(x.strip()))
    return float(x)


def is_exact_value(x) -> bool:
    return not isinstance(x, (float, np.floating))


def format_scalar(x) -> str:
    """Rationals print as ``p/q`` (or ``p``), floats with repr precision."""
    if isinstance(x, type(ZERO)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def scalar_to_json(x):
    if isinstance(x, type(ZERO)):
        return str(x)
    return float(x)


def _zeros(shape, exact):
    if exact:
        out = np.empty(shape, dtype=object)
        out.fill(ZERO)
        return out
    return np.zeros(shape)


def _identity(n, exact):
    out = _zeros((n, n), exact)
    for i in range(n):
        out[i, i] = ONE if exact else 1.0
    return out


def as_array(rows, exact: bool = True) -> np.ndarray:
    """Build a 2-d array in the requested field from nested sequences."""
    arr = np.array(rows, dtype=object)
    if arr.ndim != 2:
        raise ValueError("expected a 2-d array")
    if exact:
        return np.vectorize(lambda v: to_scalar(v, True), otypes=[object])(arr)
    return np.vectorize(lambda v: to_scalar(v, False), otypes=[float])(arr).astype(float)


# --------------------------------------------------------------------------
# Operator
# --------------------------------------------------------------------------

class Operator:
    """Square matrix acting on ``dim_local ** n_sites`` dimensional space.

    Instances are immutable: the backing array is flagged read-only.
    """

    __slots__ = ("data", "dim_local", "n_sites", "exact")

    def __init__(self, data, dim_local: int, n_sites: int | None = None, exact: bool | None = None):
        data = np.asarray(data)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError(f"operator must be square, got shape {data.shape}")
        if exact is None:
            exact = data.dtype == object
        if n_sites is None:
            n_sites = _log_dim(data.shape[0], dim_local)
        if dim_local ** n_sites != data.shape[0]:
            raise ValueError(
                f"dimension {data.shape[0]} is not {dim_local}**{n_sites}")
        if exact and data.dtype != object:
            data = np.vectorize(mpq, otypes=[object])(data)
        if not exact and data.dtype != float:
            data = data.astype(float)
        data = data.copy()
        data.flags.writeable = False
        self.data = data
        self.dim_local = dim_local
        self.n_sites = n_sites
        self.exact = exact

    # -- construction ------------------------------------------------------
    @classmethod
    def identity(cls, dim_local: int, n_sites: int = 1, exact: bool = True) -> "Operator":
        return cls(_identity(dim_local ** n_sites, exact), dim_local, n_sites, exact)

    @classmethod
    def from_rows(cls, rows, dim_local: int, exact: bool = True) -> "Operator":
        return cls(as_array(rows, exact), dim_local, exact=exact)

    @classmethod
    def permutation(cls, dim_local: int, exact: bool = True) -> "Operator":
        """The swap ``P |x> (x) |y> = |y> (x) |x>`` on two sites."""
        d = dim_local
        out = _zeros((d * d, d * d), exact)
        for x in range(d):
            for y in range(d):
                out[y * d + x, x * d + y] = ONE if exact else 1.0
        return cls(out, d, 2, exact)

    # -- basic algebra -------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def _check(self, other: "Operator"):
        if not isinstance(other, Operator):
            raise TypeError(f"expected Operator, got {type(other).__name__}")
        if self.exact != other.exact:
            raise FieldMismatchError("cannot mix exact and float operators")
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def _like(self, data) -> "Operator":
        return Operator(data, self.dim_local, self.n_sites, self.exact)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return self._like(self.data.dot(other.data))
        return self.data.dot(np.asarray(other))

    def __add__(self, other):
        self._check(other)
        return self._like(self.data + other.data)

    def __sub__(self, other):
        self._check(other)
        return self._like(self.data - other.data)

    def __neg__(self):
        return self._like(-self.data)

    def scale(self, c) -> "Operator":
        return self._like(self.data * to_scalar(c, self.exact))

    @property
    def T(self) -> "Operator":
        return self._like(self.data.T)

    def trace(self):
        return self.data.trace()

    def commutator(self, other: "Operator") -> "Operator":
        return self @ other - other @ self

    def column_sums(self) -> np.ndarray:
        return self.data.sum(axis=0)

    def max_abs(self) -> float:
        if self.dim == 0:
            return 0.0
        return float(max(abs(v) for v in self.data.flat))

    def is_zero(self, atol: float = FLOAT_ATOL) -> bool:
        if self.exact:
            return all(v == 0 for v in self.data.flat)
        return self.max_abs() <= atol

    def equals(self, other: "Operator", atol: float = FLOAT_ATOL) -> bool:
        self._check(other)
        return (self - other).is_zero(atol)

    def first_difference(self, other: "Operator"):
        """``(row, col, self_entry, other_entry)`` of the first unequal entry."""
        self._check(other)
        diff = self.data - other.data
        for (r, c), v in np.ndenumerate(diff):
            if (v != 0) if self.exact else abs(v) > FLOAT_ATOL:
                return r, c, self.data[r, c], other.data[r, c]
        return None

    def to_float(self) -> "Operator":
        return Operator(self.data.astype(float), self.dim_local, self.n_sites, False)

    def __eq__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        return (self.exact == other.exact and self.dim == other.dim
                and self.equals(other))

    __hash__ = None

    def __repr__(self):
        kind = "exact" if self.exact else "float"
        return f"Operator(dim_local={self.dim_local}, n_sites={self.n_sites}, {kind})"


def _log_dim(n, d):
    k, m = 0, 1
    while m < n:
        m *= d
        k += 1
    if m != n:
        raise ValueError(f"dimension {n} is not a power of {d}")
    return k


# --------------------------------------------------------------------------
# tensor operations
# --------------------------------------------------------------------------

def kron(a: Operator, b: Operator) -> Operator:
    """Kronecker product, ``a``'s indices leading."""
    if a.exact != b.exact:
        raise FieldMismatchError("cannot mix exact and float operators")
    if a.dim_local != b.dim_local:
        raise ValueError("kron of operators with different local dimensions")
    return Operator(np.kron(a.data, b.data), a.dim_local, a.n_sites + b.n_sites, a.exact)


def apply_local(local: np.ndarray, positions: Sequence[int], dims: Sequence[int],
                x: np.ndarray) -> np.ndarray:
    """Left-multiply ``x`` by ``local`` embedded on tensor ``positions``.

    ``dims`` lists the dimension of every tensor factor of the row space of
    ``x`` (0-based positions).  Factor ``k`` of ``local`` acts on factor
    ``positions[k]``.  Cost is proportional to the local dimension only, so
    this is the workhorse behind transfer-matrix products.
    """
    n = len(dims)
    positions = list(positions)
    if len(set(positions)) != len(positions):
        raise ValueError(f"repeated positions {positions}")
    sub = [dims[p] for p in positions]
    k = int(np.prod(sub))
    if local.shape != (k, k):
        raise ValueError(f"local operator shape {local.shape} does not match dims {sub}")
    ncols = x.shape[1]
    t = x.reshape(list(dims) + [ncols])
    t = np.moveaxis(t, positions, list(range(len(positions))))
    rest = t.shape[len(positions):]
    t = local.dot(t.reshape(k, -1)).reshape(list(sub) + list(rest))
    t = np.moveaxis(t, list(range(len(positions))), positions)
    return t.reshape(x.shape[0], ncols)


def embed(op: Operator, sites: Sequence[int], chain_length: int, dim_local: int | None = None) -> Operator:
    """Embed ``op`` on the named 1-based ``sites`` of a chain.

    The k-th tensor factor of ``op`` acts on ``sites[k]``; any order and any
    non-adjacent choice is allowed.
    """
    d = op.dim_local if dim_local is None else dim_local
    if d != op.dim_local:
        raise ValueError(f"op has local dimension {op.dim_local}, not {d}")
    sites = list(sites)
    if op.n_sites != len(sites):
        raise ValueError(f"op acts on {op.n_sites} sites but {len(sites)} were given")
    for s in sites:
        if not 1 <= s <= chain_length:
            raise ValueError(f"site {s} out of range 1..{chain_length}")
    eye = _identity(d ** chain_length, op.exact)
    data = apply_local(op.data, [s - 1 for s in sites], [d] * chain_length, eye)
    return Operator(data, d, chain_length, op.exact)


def partial_trace_first(op: Operator) -> Operator:
    """Trace over the first tensor factor."""
    if op.n_sites < 2:
        raise ValueError("partial trace needs at least two tensor factors")
    d = op.dim_local
    rest = op.dim // d
    t = op.data.reshape(d, rest, d, rest)
    out = t[0, :, 0, :].copy()
    for i in range(1, d):
        out = out + t[i, :, i, :]
    return Operator(out, d, op.n_sites - 1, op.exact)


def partial_transpose(op: Operator, site: int) -> Operator:
    """Transpose in the 1-based tensor factor ``site`` only."""
    n, d = op.n_sites, op.dim_local
    if not 1 <= site <= n:
        raise ValueError(f"site {site} out of range 1..{n}")
    t = op.data.reshape([d] * (2 * n))
    t = np.swapaxes(t, site - 1, n + site - 1)
    return Operator(t.reshape(op.dim, op.dim), d, n, op.exact)


# --------------------------------------------------------------------------
# exact / float linear algebra
# --------------------------------------------------------------------------

def rref(a: np.ndarray):
    """Exact reduced row echelon form; returns ``(R, pivot_columns)``."""
    m = np.array(a, dtype=object)
    rows, cols = m.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = next((i for i in range(r, rows) if m[i, c] != 0), None)
        if p is None:
            continue
        if p != r:
            m[[r, p]] = m[[p, r]]
        m[r] = m[r] / m[r, c]
        nz = [i for i in range(rows) if i != r and m[i, c] != 0]
        if nz:
            m[nz] = m[nz] - np.outer(m[nz, c], m[r])
        pivots.append(c)
        r += 1
    return m, pivots


def nullspace(a: np.ndarray) -> list[np.ndarray]:
    """Exact basis of ``{x : a x = 0}``."""
    r, pivots = rref(a)
    cols = a.shape[1]
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        v = _zeros(cols, True)
        v[f] = ONE
        for i, p in enumerate(pivots):
            v[p] = -r[i, f]
        basis.append(v)
    return basis


def solve_exact(a: np.ndarray, b: np.ndarray):
    """Solve ``a x = b`` exactly.

    Returns ``(x, rank, consistent)``; ``x`` is ``None`` when the system is
    inconsistent.  With free variables the particular solution sets them to 0.
    """
    a = np.asarray(a, dtype=object)
    b = np.asarray(b, dtype=object).reshape(-1, 1)
    aug = np.hstack([a, b])
    r, pivots = rref(aug)
    ncols = a.shape[1]
    if ncols in pivots:
        return None, len(pivots) - 1, False
    x = _zeros(ncols, True)
    for i, p in enumerate(pivots):
        x[p] = r[i, ncols]
    return x, len(pivots), True


def invert(op: Operator) -> Operator:
    """Exact inverse by Gauss-Jordan, or float inverse with a residual check."""
    n = op.dim
    if op.exact:
        aug = np.hstack([op.data, _identity(n, True)])
        r, pivots = rref(aug)
        for k in range(n):
            if k >= len(pivots) or pivots[k] != k:
                raise SingularMatrixError(f"singular matrix: no pivot in column {k}", pivot=k)
        return op._like(r[:, n:])
    try:
        inv = np.linalg.inv(op.data)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    resid = np.abs(op.data @ inv - np.eye(n)).sum(axis=1).max()
    if not np.isfinite(resid) or resid > INVERSE_RESIDUAL:
        raise SingularMatrixError(f"inverse residual {resid:.3g} exceeds {INVERSE_RESIDUAL}")
    return op._like(inv)


def random_rational(rng, bound: int = 10 ** 6, positive: bool = False, lo=None, hi=None):
    """A random rational ``p/q`` with ``|p|, q <= bound``.

    With ``lo``/``hi`` the value is drawn in that interval instead, still with
    denominator at most ``bound``.
    """
    q = int(rng.integers(1, bound + 1))
    if lo is not None or hi is not None:
        lo = mpq(0) if lo is None else mpq(lo)
        hi = mpq(1) if hi is None else mpq(hi)
        pmin = int(np.ceil(float(lo * q)))
        pmax = int(np.floor(float(hi * q)))
        while True:
            p = int(rng.integers(pmin, pmax + 1))
            v = mpq(p, q)
            if lo < v < hi:
                return v
            q = int(rng.integers(2, bound + 1))
            pmin, pmax = int(np.ceil(float(lo * q))), int(np.floor(float(hi * q)))
    p = int(rng.integers(1 if positive else -bound, bound + 1))
    if p == 0:
        p = 1
    return mpq(p, q)


def vector(values: Iterable[Number], exact: bool = True) -> np.ndarray:
    vals = [to_scalar(v, exact) for v in values]
    return np.array(vals, dtype=object if exact else float)
