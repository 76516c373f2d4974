"""Normalisation, Floquet-averaged density profile and mean current.

The current across a bond is the expected net number of particles moved
from left to right through that bond in one full two-step period.  Each
bond is updated once per period, so it is read off the phase vector the
bond's local update acts on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .chain import ChainSpec, build_floquet
from .kernels import ModelSpec
from .mpa import (
    LETTERS, NCPolynomial, alphabet_of, boundary_closure, mpa_stationary, scalar_eval,
)
from .stationary import StationaryState, stationary_eigensolve
from .tensor import scalar_to_json

METHODS = ("closed_form", "mpa", "eigensolve", "monte_carlo")


@dataclass
class ObservableReport:
    model: ModelSpec
    L: int
    method: str
    density: list
    current: object
    Z_L: object = None
    bond_currents: list = field(default_factory=list)
    injection: object = None
    extraction: object = None
    density_S: list | None = None
    density_S_prime: list | None = None
    density_stderr: list | None = None
    current_stderr: object = None
    bond_stderr: list | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        j = scalar_to_json
        opt = lambda xs: None if xs is None else [j(v) for v in xs]
        out = {
            "model": self.model.params_dict(),
            "L": self.L,
            "method": self.method,
            "Z_L": None if self.Z_L is None else j(self.Z_L),
            "J": j(self.current),
            "density": [j(v) for v in self.density],
            "bond_currents": [j(v) for v in self.bond_currents],
            "injection": None if self.injection is None else j(self.injection),
            "extraction": None if self.extraction is None else j(self.extraction),
            "density_S": opt(self.density_S),
            "density_S_prime": opt(self.density_S_prime),
            "density_stderr": opt(self.density_stderr),
            "J_stderr": None if self.current_stderr is None else j(self.current_stderr),
        }
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# --------------------------------------------------------------------------
# closed forms (symmetric families)
# --------------------------------------------------------------------------

def _require_symmetric(model):
    if model.asymmetric:
        raise ValueError(f"no closed form is available for {model.family}")


def _boundary_densities(model):
    one = model.scalar(1)
    if model.a + model.c <= 0 or model.b + model.d <= 0:
        raise ValueError("need a + c > 0 and b + d > 0")
    return (model.a / (model.a + model.c), model.d / (model.b + model.d),
            one / (model.a + model.c), one / (model.b + model.d))


def rising_factorial(x, n: int):
    """x (x+1) ... (x+n-1) = Gamma(x+n)/Gamma(x)."""
    out = x * 0 + 1
    for k in range(n):
        out *= x + k
    return out


def z_l_closed(model: ModelSpec, L: int):
    """<W|(E+D)^l|V> with l = L (s=1) or 2L (s=2)."""
    _require_symmetric(model)
    det = model.a * model.b - model.c * model.d
    if det == 0:
        raise ZeroDivisionError("ab = cd is a pole of the normalisation")
    ell = model.s * L
    _, _, ua, ub = _boundary_densities(model)
    base = (model.a + model.c) * (model.b + model.d) / det
    return base ** ell * rising_factorial(ua + ub, ell)


def filling_closed(model: ModelSpec, L: int, i: int):
    """Mean occupation of site i divided by the capacity s."""
    _require_symmetric(model)
    if not 1 <= i <= L:
        raise ValueError(f"site {i} outside 1..{L}")
    rl, rr, ua, ub = _boundary_densities(model)
    half = model.scalar(1) / 2
    if model.fused:
        num = rl * (2 * L + ub - 2 * i + half) + rr * (2 * i - 3 * half + ua)
        return num / (2 * L + ua + ub - 1)
    num = rl * (L + ub - i) + rr * (i - 1 + ua)
    return num / (L + ua + ub - 1)


def density_closed(model: ModelSpec, L: int, i: int):
    """Mean number of particles at site i."""
    return model.s * filling_closed(model, L, i)


def current_closed(model: ModelSpec, L: int):
    _require_symmetric(model)
    rl, rr, ua, ub = _boundary_densities(model)
    ell = model.s * L
    return 2 * model.s * model.kappa * (rl - rr) / (ell + ua + ub - 1)


def observables_closed(model: ModelSpec, L: int) -> ObservableReport:
    dens = [density_closed(model, L, i) for i in range(1, L + 1)]
    j = current_closed(model, L)
    return ObservableReport(model, L, "closed_form", dens, j, z_l_closed(model, L),
                            bond_currents=[j] * (L - 1), injection=j, extraction=j)


# --------------------------------------------------------------------------
# matrix-product expressions
# --------------------------------------------------------------------------

def _sum_letters(model):
    alpha = alphabet_of(model)
    e, d = LETTERS[alpha]
    return NCPolynomial(alpha, {e: model.scalar(1), d: model.scalar(1)})


def _c_factors(model):
    """The one or two commuting-in-value factors whose powers build Z_L."""
    x = _sum_letters(model)
    if not model.asymmetric:
        return [x]
    k, t = model.kappa, model.t
    if not model.fused:
        return [x + (k + 1 / k)]
    return [x + (k / t + t / k), x + (k * t + 1 / (k * t))]


def z_l_polynomial(model: ModelSpec, L: int) -> NCPolynomial:
    facs = _c_factors(model)
    if model.fused and not model.asymmetric:
        return facs[0] ** (2 * L)
    out = NCPolynomial.constant(alphabet_of(model), model.scalar(1))
    for f in facs:
        out = out * f ** L
    return out


def current_polynomial(model: ModelSpec, L: int) -> NCPolynomial:
    """Numerator word of the matrix-product current formula (before the prefactor)."""
    if not model.fused:
        return z_l_polynomial(model, L - 1)
    if not model.asymmetric:
        return _c_factors(model)[0] ** (2 * L - 1)
    f1, f2 = _c_factors(model)
    k, t = model.kappa, model.t
    mid = _sum_letters(model) * (t + 1 / t) + 2 * (k + 1 / k)
    return f1 ** (L - 1) * mid * f2 ** (L - 1)


def current_prefactor(model: ModelSpec):
    if model.asymmetric:
        return 1 / model.kappa - model.kappa
    return 2 * model.s * model.kappa


def _closure_for(model, degree, closure):
    if closure is None or closure.n_max < degree:
        closure = boundary_closure(model, max(degree, 0))
    return closure


def z_l_mpa(model: ModelSpec, L: int, closure=None):
    if L == 0:
        return model.scalar(1)
    p = z_l_polynomial(model, L)
    return scalar_eval(p, _closure_for(model, p.degree(), closure))


def current_mpa(model: ModelSpec, L: int, closure=None):
    """Prefactor * <W|numerator|V> / Z_L."""
    num = current_polynomial(model, L)
    closure = _closure_for(model, model.s * L, closure)
    return current_prefactor(model) * scalar_eval(num, closure) / z_l_mpa(model, L, closure)


# --------------------------------------------------------------------------
# state-derived observables
# --------------------------------------------------------------------------

def _tensor(state: StationaryState):
    return np.asarray(state.probabilities).reshape((state.dim_local,) * state.L)


def site_marginals(state: StationaryState, sites):
    """Joint distribution of the occupations at the given 1-based sites."""
    p = _tensor(state)
    keep = [s - 1 for s in sites]
    other = tuple(ax for ax in range(state.L) if ax not in keep)
    m = p.sum(axis=other) if other else p
    # sum() keeps the remaining axes in increasing order
    order = sorted(keep)
    return np.moveaxis(m, [order.index(k) for k in keep], list(range(len(keep))))


def density_profile(state: StationaryState):
    out = []
    for i in range(1, state.L + 1):
        m = site_marginals(state, [i])
        out.append(sum(n * m[n] for n in range(state.dim_local)))
    return out


def bond_flux(u_local, state: StationaryState, i: int, j: int):
    """Expected particles moved from site i to site j by one application of U_ij."""
    d = state.dim_local
    m = site_marginals(state, [i, j])
    u = u_local.data
    total = 0 * m[0, 0]
    for x in range(d):
        for y in range(d):
            p = m[x, y]
            if p == 0:
                continue
            col = x * d + y
            for row in range(d * d):
                w = u[row, col]
                if w != 0:
                    total += p * w * (x - row // d)
    return total


def site_flux(k_local, state: StationaryState, i: int):
    """Expected increase of the occupation at site i under one application of K."""
    d = state.dim_local
    m = site_marginals(state, [i])
    k = k_local.data
    total = 0 * m[0]
    for x in range(d):
        for y in range(d):
            if k[y, x] != 0 and m[x] != 0:
                total += m[x] * k[y, x] * (y - x)
    return total


def observables_from_state(chain: ChainSpec, state: StationaryState, companion: StationaryState,
                           method: str = "eigensolve", Z_L=None, ops=None) -> ObservableReport:
    """Density averaged over both Floquet phases, per-bond and boundary fluxes.

    ``state`` is fixed by the full period and ``companion`` is its image
    after the first half-step.
    """
    if state.phase != "S" or companion.phase != "S'":
        raise ValueError("expected the S phase vector and its S' companion")
    if state.L != chain.L or companion.L != chain.L:
        raise ValueError("state length does not match the chain")
    ops = ops or build_floquet(chain)
    L = chain.L
    ds, dsp = density_profile(state), density_profile(companion)
    dens = [(x + y) / 2 for x, y in zip(ds, dsp)]
    # open: Uo acts on S and carries the odd bonds; periodic: Ue acts on S and carries the even bonds
    first_parity = 1 if chain.is_open else 0
    bonds = []
    n_bonds = L - 1 if chain.is_open else L
    for i in range(1, n_bonds + 1):
        src = state if i % 2 == first_parity else companion
        bonds.append(bond_flux(ops.u_local, src, i, i % L + 1))
    inj = ext = None
    if chain.is_open:
        inj = site_flux(ops.b_left, companion, 1)
        ext = -site_flux(ops.b_right, state, L)
        current = inj if not bonds else bonds[0]
    else:
        current = bonds[0]
    return ObservableReport(chain.model, L, method, dens, current, Z_L, bonds, inj, ext, ds, dsp)


def companion_of(chain: ChainSpec, state: StationaryState, ops=None) -> StationaryState:
    ops = ops or build_floquet(chain)
    first = ops.u_odd if chain.is_open else ops.u_even
    p = first @ state.probabilities
    return StationaryState(p, state.dim_local, state.L, "S'", state.method, state.exact)


def observables_eigensolve(chain: ChainSpec, states=None) -> ObservableReport:
    ops = build_floquet(chain)
    s = stationary_eigensolve(ops.markov, states, chain.L)
    return observables_from_state(chain, s, companion_of(chain, s, ops), "eigensolve", ops=ops)


def observables_mpa(chain: ChainSpec) -> ObservableReport:
    model = chain.model
    closure = boundary_closure(model, model.s * chain.L + 2)
    s, sp, z = mpa_stationary(chain, closure)
    rep = observables_from_state(chain, s, sp, "mpa", ops=build_floquet(chain))
    rep.Z_L = z_l_mpa(model, chain.L, closure)
    rep.extra["J_formula"] = scalar_to_json(current_mpa(model, chain.L, closure))
    return rep
