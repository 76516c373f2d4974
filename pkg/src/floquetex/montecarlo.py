"""Monte Carlo sampling of the two-step parallel-update dynamics.

Every local block draws its own uniform from a counter-based generator keyed
by (seed, replica, period, half-step, block), so a run is reproducible
bit-for-bit no matter how replicas are scheduled across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .chain import ChainSpec, boundary_updates, local_update, validate_parameters
from .observables import ObservableReport

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53


@dataclass(frozen=True)
class MCConfig:
    seed: int = 0
    burn_in: int = 1000
    measure: int = 10000
    replicas: int = 1
    threads: int = 1
    particles: int | None = None  # periodic chains only; default is half filling

    def __post_init__(self):
        if self.measure <= 0:
            raise ValueError("measure must be positive")
        if self.replicas < 1:
            raise ValueError("need at least one replica")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.threads < 1:
            raise ValueError("threads must be positive")
        if self.particles is not None and self.particles < 0:
            raise ValueError("particle number must be non-negative")


def initial_configuration(chain: ChainSpec, particles: int | None = None) -> np.ndarray:
    """Empty lattice for open chains; N particles spread evenly on a ring."""
    L, s = chain.L, chain.model.s
    if chain.is_open:
        return np.zeros(L, np.int64)
    n = s * L // 2 if particles is None else particles
    if n > s * L:
        raise ValueError(f"{n} particles do not fit on {L} sites with capacity {s}")
    return np.array([(i + 1) * n // L - i * n // L for i in range(L)], dtype=np.int64)


# --------------------------------------------------------------------------
# counter-based uniforms
# --------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _mix64(z):
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def stream_key(seed, replica):
    return _mix64(np.uint64(seed) ^ _mix64(np.uint64(replica)))


@numba.njit(cache=True, nogil=True)
def step_key(key, period, phase):
    return _mix64(key ^ _mix64(np.uint64(2 * period + phase)))


@numba.njit(cache=True, nogil=True)
def uniform(key, block):
    """Uniform on [0, 1) with 53 random bits."""
    return float(_mix64(key + np.uint64(block)) >> np.uint64(11)) * _TO_UNIT


def uniforms(seed: int, replica: int, period: int, phase: int, n: int) -> np.ndarray:
    """The n block uniforms used in one half-step (for inspection and tests)."""
    k = np.uint64(step_key(np.uint64(stream_key(np.uint64(seed), np.uint64(replica))), np.int64(period), np.int64(phase)))
    return np.array([uniform(k, b) for b in range(n)])


# --------------------------------------------------------------------------
# kernel
# --------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _draw(cum, col, u):
    n = cum.shape[0]
    for r in range(n - 1):
        if u < cum[r, col]:
            return r
    return n - 1


@numba.njit(cache=True, nogil=True)
def _pair_sweep(tau, d, cum_u, starts, L, key, flux, measure):
    # blocks are (i, i+1 mod L) for i in starts; returns nothing, updates tau in place
    for b in range(starts.shape[0]):
        i = starts[b]
        j = i + 1
        if j == L:
            j = 0
        x = tau[i]
        y = tau[j]
        r = _draw(cum_u, x * d + y, uniform(key, b))
        nx = r // d
        tau[i] = nx
        tau[j] = r - nx * d
        if measure:
            flux[i] += x - nx


@numba.njit(cache=True, nogil=True)
def _site_update(tau, cum_k, site, key, block):
    x = tau[site]
    nx = _draw(cum_k, x, uniform(key, block))
    tau[site] = nx
    return nx - x


@numba.njit(cache=True, nogil=True)
def run_replica(tau0, d, is_open, cum_u, cum_b, cum_bbar, key, burn_in, periods):
    """One independent chain started from ``tau0``.

    Returns occupation sums at the two phases, per-bond signed transfer
    sums, and the injected / extracted particle totals.
    """
    tau = tau0.copy()
    L = tau.shape[0]
    occ_s = np.zeros(L, np.float64)
    occ_sp = np.zeros(L, np.float64)
    flux = np.zeros(L, np.int64)
    n_odd = L // 2
    odd = np.empty(n_odd, np.int64)
    for k in range(n_odd):
        odd[k] = 2 * k
    if is_open:
        n_even = (L - 1) // 2
    else:
        n_even = L // 2
    even = np.empty(n_even, np.int64)
    for k in range(n_even):
        even[k] = 2 * k + 1
    inj = 0
    ext = 0
    for p in range(burn_in + periods):
        m = p >= burn_in
        if is_open:
            k0 = step_key(key, p, 0)
            _pair_sweep(tau, d, cum_u, odd, L, k0, flux, m)
            dx = _site_update(tau, cum_bbar, L - 1, k0, n_odd)
            if m:
                ext -= dx
                for i in range(L):
                    occ_sp[i] += tau[i]
            k1 = step_key(key, p, 1)
            _pair_sweep(tau, d, cum_u, even, L, k1, flux, m)
            dx = _site_update(tau, cum_b, 0, k1, n_even)
            if m:
                inj += dx
                for i in range(L):
                    occ_s[i] += tau[i]
        else:
            k0 = step_key(key, p, 0)
            _pair_sweep(tau, d, cum_u, even, L, k0, flux, m)
            if m:
                for i in range(L):
                    occ_sp[i] += tau[i]
            k1 = step_key(key, p, 1)
            _pair_sweep(tau, d, cum_u, odd, L, k1, flux, m)
            if m:
                for i in range(L):
                    occ_s[i] += tau[i]
    return occ_s, occ_sp, flux, inj, ext


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------

def cumulative_table(op) -> np.ndarray:
    """Column-wise cumulative sums of a stochastic matrix, last row pinned to 1."""
    m = np.asarray(op.to_float().data, dtype=np.float64)
    cum = np.cumsum(m, axis=0)
    cum[-1, :] = 1.0
    return np.ascontiguousarray(cum)


@dataclass(frozen=True)
class ReplicaResult:
    replica: int
    density_S: np.ndarray
    density_S_prime: np.ndarray
    bond_currents: np.ndarray
    injection: float
    extraction: float


def _tables(chain: ChainSpec):
    rep = validate_parameters(chain.model, chain.boundary)
    if not rep.valid:
        raise ValueError(f"parameters do not define a stochastic process: {rep.out_of_range or rep.poles}")
    cum_u = cumulative_table(local_update(chain.model))
    if chain.is_open:
        b, bbar = boundary_updates(chain.model)
        return cum_u, cumulative_table(b), cumulative_table(bbar)
    dummy = np.ones((chain.model.dim_local, chain.model.dim_local))
    return cum_u, dummy, dummy


def _one(chain, tables, cfg, r):
    key = np.uint64(stream_key(np.uint64(cfg.seed), np.uint64(r)))
    occ_s, occ_sp, flux, inj, ext = run_replica(
        initial_configuration(chain, cfg.particles), chain.model.dim_local, chain.is_open, *tables, key, cfg.burn_in, cfg.measure)
    n = float(cfg.measure)
    n_bonds = chain.L - 1 if chain.is_open else chain.L
    return ReplicaResult(r, occ_s / n, occ_sp / n, flux[:n_bonds] / n, inj / n, ext / n)


def run_replicas(chain: ChainSpec, cfg: MCConfig):
    tables = _tables(chain)
    ids = list(range(cfg.replicas))
    if cfg.threads > 1 and cfg.replicas > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(lambda r: _one(chain, tables, cfg, r), ids))
    else:
        results = [_one(chain, tables, cfg, r) for r in ids]
    return sorted(results, key=lambda res: res.replica)


def _mean_err(rows):
    a = np.asarray(rows, dtype=np.float64)
    mean = a.mean(axis=0)
    if a.shape[0] < 2:
        return mean, None
    return mean, a.std(axis=0, ddof=1) / math.sqrt(a.shape[0])


def mc_run(chain: ChainSpec, cfg: MCConfig) -> ObservableReport:
    """Empirical density (both phases) and currents with replica standard errors."""
    res = run_replicas(chain, cfg)
    ds, _ = _mean_err([r.density_S for r in res])
    dsp, _ = _mean_err([r.density_S_prime for r in res])
    dens, dens_err = _mean_err([(r.density_S + r.density_S_prime) / 2 for r in res])
    bonds, bond_err = _mean_err([r.bond_currents for r in res])
    per_rep_j = [float(np.mean(r.bond_currents)) if len(r.bond_currents) else r.injection for r in res]
    j, j_err = _mean_err(per_rep_j)
    inj = ext = None
    extra = {"seed": cfg.seed, "periods": cfg.measure, "burn_in": cfg.burn_in,
             "replicas": cfg.replicas}
    if not chain.is_open:
        extra["particles"] = int(initial_configuration(chain, cfg.particles).sum())
    if chain.is_open:
        inj, inj_err = _mean_err([r.injection for r in res])
        ext, ext_err = _mean_err([r.extraction for r in res])
        inj, ext = float(inj), float(ext)
        extra["injection_stderr"] = None if inj_err is None else float(inj_err)
        extra["extraction_stderr"] = None if ext_err is None else float(ext_err)
    return ObservableReport(
        chain.model, chain.L, "monte_carlo", list(map(float, dens)), float(j), None,
        list(map(float, bonds)), inj, ext, list(map(float, ds)), list(map(float, dsp)),
        None if dens_err is None else list(map(float, dens_err)),
        None if j_err is None else float(j_err),
        None if bond_err is None else list(map(float, bond_err)),
        extra)
