"""Exact (or floating) stationary vectors of a column-stochastic matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .tensor import ONE, Operator, nullspace, FLOAT_ATOL

EXACT_DIM_CAP = 3 ** 7
FLOAT_DIM_CAP = 200_000
FLOAT_RESIDUAL = 1e-12


class ReducibleChainError(ValueError):
    """More than one closed communicating class: the stationary vector is not unique."""

    def __init__(self, classes, closed=None):
        self.classes = classes
        self.closed = classes if closed is None else closed
        sizes = sorted((len(c) for c in self.closed), reverse=True)
        super().__init__(f"Markov matrix is reducible: {len(self.closed)} closed classes among "
                         f"{len(classes)} communicating classes "
                         f"(closed sizes {sizes[:8]}{'...' if len(sizes) > 8 else ''})")


class NotStochasticError(ValueError):
    pass


@dataclass(frozen=True)
class StationaryState:
    """Probability vector over configurations, in basis order.

    ``phase`` is ``"S"`` for the vector fixed by the full period and ``"S'"``
    for its image after the first half-step.
    """

    probabilities: np.ndarray
    dim_local: int
    L: int
    phase: str = "S"
    method: str = "eigensolve"
    exact: bool = True

    def __post_init__(self):
        p = self.probabilities
        if len(p) != self.dim_local ** self.L:
            raise ValueError("probability vector has the wrong length")
        if any(v < 0 for v in p):
            raise ValueError("negative probability")
        total = sum(p)
        if self.exact and total != 1:
            raise ValueError(f"probabilities sum to {total}, not 1")
        if not self.exact and abs(total - 1) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, not 1")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "probabilities", p)

    def __len__(self):
        return len(self.probabilities)

    def equals(self, other: "StationaryState", atol=FLOAT_ATOL) -> bool:
        if self.exact and other.exact:
            return all(x == y for x, y in zip(self.probabilities, other.probabilities))
        return np.allclose(self.probabilities.astype(float), other.probabilities.astype(float),
                           atol=atol, rtol=0)


def _check_stochastic(m: Operator):
    sums = m.column_sums()
    if m.exact:
        bad = [j for j, v in enumerate(sums) if v != 1]
    else:
        bad = [j for j, v in enumerate(sums) if abs(v - 1) > 1e-10]
    if bad:
        raise NotStochasticError(f"column {bad[0]} sums to {sums[bad[0]]}")
    if any(v < 0 for v in m.data.flat):
        raise NotStochasticError("matrix has a negative entry")


def communicating_classes(m: Operator, states=None):
    """Strongly connected components of the transition digraph j -> i."""
    data = m.data if states is None else m.data[np.ix_(states, states)]
    adj = np.array([[v != 0 for v in row] for row in data], dtype=bool)
    n, labels = connected_components(csr_matrix(adj.T), directed=True, connection="strong")
    idx = np.arange(len(labels)) if states is None else np.asarray(states)
    return [list(idx[labels == k]) for k in range(n)]


def closed_classes(m: Operator, classes):
    """Classes with no transition leaving them (the recurrent ones)."""
    out = []
    for c in classes:
        inside = set(c)
        rows = [i for i in range(m.dim) if i not in inside]
        block = m.data[np.ix_(rows, list(c))] if rows else np.zeros((0, 0))
        if not any(v != 0 for v in np.asarray(block).flat):
            out.append(c)
    return out


def stationary_eigensolve(m: Operator, states=None, L: int | None = None,
                          phase: str = "S") -> StationaryState:
    """Unique solution of (M - I) x = 0, x >= 0, sum x = 1.

    Transient states are allowed (they get probability zero); the chain is
    refused when it has more than one closed class.

    ``states`` restricts the solve to a closed subset of configurations (for
    instance one particle-number sector of a periodic chain); the returned
    vector is zero outside it.
    """
    _check_stochastic(m)
    if m.dim > (EXACT_DIM_CAP if m.exact else FLOAT_DIM_CAP):
        raise ValueError(f"dimension {m.dim} exceeds the eigen-solve cap")
    full = states is None
    idx = list(range(m.dim)) if full else list(states)
    if not full:
        outside = [i for i in range(m.dim) if i not in set(idx)]
        leak = m.data[np.ix_(outside, idx)] if outside else np.zeros((0, 0))
        if any(v != 0 for v in np.asarray(leak).flat):
            raise ValueError("restricted state set is not closed under M")
    classes = communicating_classes(m, idx)
    closed = closed_classes(m, classes)
    if len(closed) != 1:
        raise ReducibleChainError(classes, closed)
    sub = m.data[np.ix_(idx, idx)]
    n = len(idx)
    if m.exact:
        a = sub - np.diag([ONE] * n)
        ker = nullspace(a)
        if len(ker) != 1:
            raise ValueError(f"kernel of M - I has dimension {len(ker)}")
        v = ker[0]
        v = v / sum(v)
        out = np.array([0 * ONE] * m.dim, dtype=object)
    else:
        a = sub - np.eye(n)
        a = np.vstack([a, np.ones(n)])
        rhs = np.zeros(n + 1)
        rhs[-1] = 1.0
        v, *_ = np.linalg.lstsq(a, rhs, rcond=None)
        resid = np.abs(sub @ v - v).max()
        if resid > FLOAT_RESIDUAL:
            raise ValueError(f"stationary residual {resid:.3g} exceeds {FLOAT_RESIDUAL}")
        v = np.clip(v, 0.0, None)
        v = v / v.sum()
        out = np.zeros(m.dim)
    out[idx] = v
    return StationaryState(out, m.dim_local, m.n_sites if L is None else L, phase, "eigensolve", m.exact)


def sector_states(L: int, s: int, n_particles: int):
    """Basis indices of configurations with a fixed total occupation."""
    from .chain import configurations
    return [i for i, c in enumerate(configurations(L, s)) if sum(c) == n_particles]
