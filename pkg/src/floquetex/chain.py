"""Two-step Floquet Markov matrices and inhomogeneous transfer matrices.

Open chains (odd L):     M = Ue Uo,  Uo = prod U_{2k-1,2k} Bbar_L,  Ue = B_1 prod U_{2k,2k+1}
Periodic chains (even L): M = Uo Ue with the bond (L, 1) closing the ring.

Here U = P R(kappa/kappa^-1) is the local bulk update, B = K(kappa) and
Bbar = Kbar(kappa^-1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .kernels import (
    ModelSpec, PoleError, k_dual, k_left, k_right, r_check, r_matrix,
)
from .tensor import Operator, apply_local, partial_trace_first, _identity, format_scalar

OPEN, PERIODIC = "open", "periodic"


@dataclass(frozen=True)
class ChainSpec:
    model: ModelSpec
    L: int
    boundary: str = OPEN

    def __post_init__(self):
        if self.boundary not in (OPEN, PERIODIC):
            raise ValueError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")
        if self.L < 1:
            raise ValueError("chain length must be positive")
        if self.boundary == OPEN and self.L % 2 == 0:
            raise ValueError(f"open chains need an odd number of sites, got L={self.L}")
        if self.boundary == PERIODIC and self.L % 2 == 1:
            raise ValueError(f"periodic chains need an even number of sites, got L={self.L}")

    @property
    def dim(self) -> int:
        return self.model.dim_local ** self.L

    @property
    def is_open(self) -> bool:
        return self.boundary == OPEN


@dataclass(frozen=True)
class FloquetOperators:
    u_odd: Operator
    u_even: Operator
    u_local: Operator
    markov: Operator
    b_left: Operator | None = None
    b_right: Operator | None = None


def configurations(L: int, s: int):
    """All occupation tuples in basis order (site 1 is the most significant digit)."""
    return list(itertools.product(range(s + 1), repeat=L))


def config_label(config) -> str:
    return "".join(str(v) for v in config)


def occupation_operator(L: int, s: int, exact: bool = True) -> Operator:
    """Diagonal operator counting the total number of particles."""
    n = (s + 1) ** L
    data = _identity(n, exact)
    for i, cfg in enumerate(configurations(L, s)):
        data[i, i] = data[i, i] * sum(cfg)
    return Operator(data, s + 1, L, exact)


# --------------------------------------------------------------------------
# local operators
# --------------------------------------------------------------------------

def local_update(model: ModelSpec) -> Operator:
    """U = P R(kappa / kappa^-1): argument 2 kappa (additive) or kappa^2."""
    kappa, kinv = model.staggered()
    return r_check(model, model.ratio(kappa, kinv))


def boundary_updates(model: ModelSpec):
    """(B, Bbar) = (K(kappa), Kbar(kappa^-1))."""
    kappa, kinv = model.staggered()
    return k_left(model, kappa), k_right(model, kinv)


def _embed_all(n, d, exact, factors):
    x = _identity(d ** n, exact)
    for op, sites in factors:
        x = apply_local(op.data, [s - 1 for s in sites], [d] * n, x)
    return Operator(x, d, n, exact)


def build_floquet(chain: ChainSpec) -> FloquetOperators:
    """Assemble the Floquet half-steps and the Markov matrix."""
    m, L = chain.model, chain.L
    d, ex = m.dim_local, m.exact
    u = local_update(m)
    if chain.is_open:
        b, bbar = boundary_updates(m)
        odd = [(u, (2 * k - 1, 2 * k)) for k in range(1, (L - 1) // 2 + 1)]
        odd.append((bbar, (L,)))
        even = [(u, (2 * k, 2 * k + 1)) for k in range(1, (L - 1) // 2 + 1)]
        even.append((b, (1,)))
        u_odd = _embed_all(L, d, ex, odd)
        u_even = _embed_all(L, d, ex, even)
        return FloquetOperators(u_odd, u_even, u, u_even @ u_odd, b, bbar)
    odd = [(u, (2 * k - 1, 2 * k)) for k in range(1, L // 2 + 1)]
    even = [(u, (2 * k, (2 * k) % L + 1)) for k in range(1, L // 2 + 1)]
    u_odd = _embed_all(L, d, ex, odd)
    u_even = _embed_all(L, d, ex, even)
    return FloquetOperators(u_odd, u_even, u, u_odd @ u_even)


# --------------------------------------------------------------------------
# transfer matrices
# --------------------------------------------------------------------------

def staggered_inhomogeneities(chain: ChainSpec):
    kappa, kinv = chain.model.staggered()
    if chain.is_open:
        odd, even = kappa, kinv
    else:
        odd, even = kinv, kappa
    return [odd if i % 2 == 1 else even for i in range(1, chain.L + 1)]


def transfer_matrix(chain: ChainSpec, z, inhomogeneities=None) -> Operator:
    """Inhomogeneous transfer matrix t(z | z_1..z_L), auxiliary space traced out.

    Without ``inhomogeneities`` the staggered choice of the Floquet
    construction is used.
    """
    m, L = chain.model, chain.L
    z = m.scalar(z)
    zs = staggered_inhomogeneities(chain) if inhomogeneities is None else [m.scalar(v) for v in inhomogeneities]
    if len(zs) != L:
        raise ValueError(f"expected {L} inhomogeneities, got {len(zs)}")
    d, ex = m.dim_local, m.exact
    dims = [d] * (L + 1)
    x = _identity(d ** (L + 1), ex)
    if chain.is_open:
        for j in range(L, 0, -1):
            x = apply_local(r_matrix(m, m.compose(z, zs[j - 1])).data, [j, 0], dims, x)
        x = apply_local(k_left(m, z).data, [0], dims, x)
    for j in range(1, L + 1):
        x = apply_local(r_matrix(m, m.ratio(z, zs[j - 1])).data, [0, j], dims, x)
    if chain.is_open:
        x = apply_local(k_dual(m, z).data, [0], dims, x)
    return partial_trace_first(Operator(x, d, L + 1, ex))


# --------------------------------------------------------------------------
# parameter domain
# --------------------------------------------------------------------------

@dataclass
class DomainReport:
    """Which local transition probabilities leave [0, 1]."""

    model: ModelSpec
    transitions: list = field(default_factory=list)
    out_of_range: list = field(default_factory=list)
    vanishing: list = field(default_factory=list)
    poles: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.out_of_range and not self.poles

    @property
    def degenerate(self) -> bool:
        return bool(self.vanishing)

    @property
    def mpa_ready(self) -> bool:
        """Boundary reductions divide by a and b."""
        return self.valid and self.model.a > 0 and self.model.b > 0

    def probability(self, name, src, dst):
        for n, s_, d_, v in self.transitions:
            if (n, s_, d_) == (name, src, dst):
                return v
        raise KeyError((name, src, dst))

    def summary(self) -> str:
        state = "valid" if self.valid else "invalid"
        if self.valid and self.degenerate:
            state = "degenerate-valid"
        return state


_REFERENCE = dict(kappa="3/10", t="2/5", a="7/10", b="11/20", c="3/20", d="1/5")


def _local_tables(model: ModelSpec, boundary: str):
    s = model.s
    two = [(x, y) for x in range(s + 1) for y in range(s + 1)]
    tables = [("U", local_update(model), two)]
    if boundary == OPEN:
        b, bbar = boundary_updates(model)
        one = [(x,) for x in range(s + 1)]
        tables += [("B", b, one), ("Bbar", bbar, one)]
    return tables


def _transitions(model, boundary=OPEN):
    out = []
    for name, op, states in _local_tables(model, boundary):
        for j, src in enumerate(states):
            for i, dst in enumerate(states):
                out.append((name, config_label(src), config_label(dst), op.data[i, j]))
    return out


def validate_parameters(model: ModelSpec, boundary: str = OPEN) -> DomainReport:
    """Evaluate every local transition probability and flag those outside [0, 1].

    ``vanishing`` lists moves that are possible for generic parameters but
    have probability zero at this point (frozen or simplified dynamics).
    Periodic chains only use the bulk update, so only it is checked.
    """
    rep = DomainReport(model)
    try:
        rep.transitions = _transitions(model, boundary)
    except (PoleError, ZeroDivisionError) as exc:
        rep.poles.append(str(exc))
        return rep
    ref = ModelSpec(model.family, exact=True,
                    **{k: v for k, v in _REFERENCE.items() if k != "t" or model.asymmetric})
    generic = {(n, s_, d_): v for n, s_, d_, v in _transitions(ref, boundary)}
    for n, s_, d_, v in rep.transitions:
        if v < 0 or v > 1:
            rep.out_of_range.append((n, s_, d_, v))
        if s_ != d_ and v == 0 and generic[(n, s_, d_)] != 0:
            rep.vanishing.append((n, s_, d_))
    return rep


def describe_transitions(rep: DomainReport) -> list[str]:
    return [f"{n}: {s_} -> {d_}  {format_scalar(v)}" for n, s_, d_, v in rep.transitions if s_ != d_]
