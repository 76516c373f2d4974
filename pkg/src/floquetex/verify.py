"""Exact certification of the identities behind the integrable construction.

Each check evaluates both sides of a rational-function identity at one
sampled point and compares them with zero tolerance (exact mode).  Entry
degrees here are small, so agreement at many random rational points
certifies the identity.
"""

from __future__ import annotations

import contextlib
import time

import numpy as np
from gmpy2 import mpq

from . import kernels
from .chain import ChainSpec, OPEN, PERIODIC, build_floquet, occupation_operator, transfer_matrix
from .kernels import FAMILIES, ModelSpec, PoleError
from .reports import PropertyReport, compare, skipped
from .tensor import (
    Operator, SingularMatrixError, embed, invert, partial_transpose, random_rational,
)

SAMPLE_BOUND = 10 ** 6
DEFAULT_POINTS = 20
CORRUPTION = mpq(1, 10 ** 6)


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------

def random_model(family: str, rng, bound: int = SAMPLE_BOUND, pinned=None) -> ModelSpec:
    """Generic parameters: positive boundary rates, 0 < t < 1, positive kappa.

    Entries of ``pinned`` (name -> value) override the random draws.
    """
    kw = {k: random_rational(rng, bound, positive=True) for k in "abcd"}
    kw["kappa"] = random_rational(rng, bound, positive=True)
    if family.endswith("asep"):
        kw["t"] = random_rational(rng, bound, lo=0, hi=1)
    for k, v in (pinned or {}).items():
        if k != "t" or family.endswith("asep"):
            kw[k] = v
    return ModelSpec(family, **kw)


def random_point(model: ModelSpec, rng, bound: int = SAMPLE_BOUND):
    # multiplicative arguments are kept positive so that products never hit z = 0
    return random_rational(rng, bound, positive=not model.additive)


def _retry(fn, rng, attempts: int = 50):
    """Call fn(rng) until it does not land on a pole or singular point."""
    last = None
    for _ in range(attempts):
        try:
            return fn(rng)
        except (PoleError, ZeroDivisionError, SingularMatrixError) as exc:
            last = exc
    raise RuntimeError(f"no regular sample point found after {attempts} attempts: {last}")


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _on(op, sites, n, model):
    return embed(op, sites, n, model.dim_local)


def _r(model, z, sites=(1, 2), n=2):
    return _on(kernels.r_matrix(model, z), list(sites), n, model)


def _eye(model, n):
    return Operator.identity(model.dim_local, n, model.exact)


# --------------------------------------------------------------------------
# bulk and boundary identities
# --------------------------------------------------------------------------

def check_ybe(model: ModelSpec, z1, z2, z3) -> PropertyReport:
    """R12(z1/z2) R13(z1/z3) R23(z2/z3) = R23 R13 R12 on three sites."""
    z1, z2, z3 = (model.scalar(z) for z in (z1, z2, z3))
    r12 = _r(model, model.ratio(z1, z2), (1, 2), 3)
    r13 = _r(model, model.ratio(z1, z3), (1, 3), 3)
    r23 = _r(model, model.ratio(z2, z3), (2, 3), 3)
    return compare("ybe", model, r12 @ r13 @ r23, r23 @ r13 @ r12, {"z1": z1, "z2": z2, "z3": z3})


def check_reflection(model: ModelSpec, z1, z2) -> PropertyReport:
    """R12(z1/z2) K1(z1) R21(z1 z2) K2(z2) = K2(z2) R12(z1 z2) K1(z1) R21(z1/z2)."""
    z1, z2 = model.scalar(z1), model.scalar(z2)
    k1 = _on(kernels.k_left(model, z1), [1], 2, model)
    k2 = _on(kernels.k_left(model, z2), [2], 2, model)
    q, c = model.ratio(z1, z2), model.compose(z1, z2)
    lhs = _r(model, q) @ k1 @ _r(model, c, (2, 1)) @ k2
    rhs = k2 @ _r(model, c) @ k1 @ _r(model, q, (2, 1))
    return compare("reflection", model, lhs, rhs, {"z1": z1, "z2": z2})


def check_reversed_reflection(model: ModelSpec, z1, z2) -> PropertyReport:
    """The right-boundary equation, with every R replaced by its inverse."""
    z1, z2 = model.scalar(z1), model.scalar(z2)
    k1 = _on(kernels.k_right(model, z1), [1], 2, model)
    k2 = _on(kernels.k_right(model, z2), [2], 2, model)
    q, c = model.ratio(z1, z2), model.compose(z1, z2)
    lhs = invert(_r(model, q)) @ k1 @ invert(_r(model, c, (2, 1))) @ k2
    rhs = k2 @ invert(_r(model, c)) @ k1 @ invert(_r(model, q, (2, 1)))
    return compare("reversed_reflection", model, lhs, rhs, {"z1": z1, "z2": z2})


def _transposed_inverse(r: Operator, site: int) -> Operator:
    return partial_transpose(invert(partial_transpose(r, site)), site)


def check_dual_reflection(model: ModelSpec, z1, z2) -> PropertyReport:
    """Kt2(z2) ((R21^t1(z1 z2))^-1)^t1 Kt1(z1) R21(z2/z1)
    = R12(z2/z1) Kt1(z1) ((R12^t2(z1 z2))^-1)^t2 Kt2(z2)."""
    z1, z2 = model.scalar(z1), model.scalar(z2)
    kt1 = _on(kernels.k_dual(model, z1), [1], 2, model)
    kt2 = _on(kernels.k_dual(model, z2), [2], 2, model)
    q, c = model.ratio(z2, z1), model.compose(z1, z2)
    lhs = kt2 @ _transposed_inverse(_r(model, c, (2, 1)), 1) @ kt1 @ _r(model, q, (2, 1))
    rhs = _r(model, q) @ kt1 @ _transposed_inverse(_r(model, c), 2) @ kt2
    return compare("dual_reflection", model, lhs, rhs, {"z1": z1, "z2": z2})


def check_dual_roundtrip(model: ModelSpec, z) -> PropertyReport:
    """Kbar rebuilt from the dual matrix equals Kbar."""
    z = model.scalar(z)
    rebuilt = kernels.k_right_from_dual(model, lambda w: kernels.k_dual(model, w), z)
    return compare("dual_roundtrip", model, rebuilt, kernels.k_right(model, z), {"z": z})


def check_stochastic(op: Operator, name: str = "stochastic", model=None, point=None,
                     require_nonnegative: bool = False) -> PropertyReport:
    """Column sums equal one; negative entries are reported and optionally fatal."""
    sums = op.column_sums()
    bad = None
    for j, v in enumerate(sums):
        off = (v != 1) if op.exact else abs(v - 1) > 1e-12
        if off:
            bad = f"column {j} sums to {v}"
            break
    neg = [(i, j) for (i, j), v in np.ndenumerate(op.data) if v < 0]
    params = model.params_dict() if model is not None else {}
    if neg:
        params = dict(params, negative_entries=len(neg))
        if require_nonnegative and bad is None:
            i, j = neg[0]
            bad = f"entry ({i},{j}) is negative: {op.data[i, j]}"
    fam = model.family if model is not None else "operator"
    dev = 0.0 if bad is None else None
    return PropertyReport(name, fam, bad is None, dict(point or {}), params, dev, bad)


def check_markov(model: ModelSpec, z):
    z = model.scalar(z)
    pt = {"z": z}
    return [
        check_stochastic(kernels.r_matrix(model, z), "markov_r", model, pt),
        check_stochastic(kernels.k_left(model, z), "markov_k", model, pt),
        check_stochastic(kernels.k_right(model, z), "markov_kbar", model, pt),
    ]


def check_regularity(model: ModelSpec):
    """R(regular) = P and K(regular) = Kbar(regular) = 1.

    At special boundary rates the K entries are 0/0 at the regular
    point; that case is reported as skipped.
    """
    reg = model.regular
    p = Operator.permutation(model.dim_local, model.exact)
    one = _eye(model, 1)
    out = []
    for name, fn, target in (("regularity_r", kernels.r_matrix, p),
                             ("regularity_k", kernels.k_left, one),
                             ("regularity_kbar", kernels.k_right, one)):
        try:
            out.append(compare(name, model, fn(model, reg), target))
        except PoleError:
            out.append(skipped(name, model, "entries are 0/0 at the regular point"))
    return out


def check_unitarity(model: ModelSpec, z):
    z = model.scalar(z)
    zi = model.inverse(z)
    pt = {"z": z}
    one, two = _eye(model, 1), _eye(model, 2)
    return [
        compare("unitarity_r", model, _r(model, z) @ _r(model, zi, (2, 1)), two, pt),
        compare("unitarity_k", model, kernels.k_left(model, z) @ kernels.k_left(model, zi), one, pt),
        compare("unitarity_kbar", model, kernels.k_right(model, z) @ kernels.k_right(model, zi), one, pt),
    ]


def check_left_right_symmetry(model: ModelSpec, z) -> PropertyReport:
    """P R(z) P = R(z) holds for the symmetric families and must fail otherwise."""
    z = model.scalar(z)
    r = kernels.r_matrix(model, z)
    p = Operator.permutation(model.dim_local, model.exact)
    holds = (p @ r @ p) == r
    expected = not model.asymmetric
    cx = None if holds == expected else f"P R P == R is {holds}, expected {expected}"
    return PropertyReport("left_right_symmetry", model.family, cx is None, {"z": z},
                          model.params_dict(), 0.0 if cx is None else None, cx)


# --------------------------------------------------------------------------
# fusion
# --------------------------------------------------------------------------

def check_fusion(model: ModelSpec, z):
    """Fusion-built R, K, Kbar against the explicit fused matrices."""
    fused = model.fusion()
    z = fused.scalar(z)
    pt = {"z": z}
    return [
        compare("fusion_r", fused, kernels.fuse_r(fused, z), kernels.r_matrix(fused, z), pt),
        compare("fusion_k", fused, kernels.fuse_k(fused, z), kernels.k_left(fused, z), pt),
        compare("fusion_kbar", fused, kernels.fuse_k_bar(fused, z), kernels.k_right(fused, z), pt),
    ]


def check_projectors(model: ModelSpec):
    """Q^l Q^r = 1, Q^r Q^l = R(mu), Q^l R(mu) = Q^l, R(mu) Q^r = Q^r, R(mu)^2 = R(mu)."""
    base = model.fundamental()
    pr = kernels.fusion_projectors(base)
    rmu = kernels.r_matrix(base, pr.mu).data
    ql, qr = pr.q_left, pr.q_right
    eq = lambda x, y: all(u == v for u, v in zip(np.ravel(x), np.ravel(y)))
    eye3 = np.eye(3, dtype=int)
    conds = {
        "ql_qr_identity": eq(ql.dot(qr), eye3),
        "qr_ql_is_r_mu": eq(qr.dot(ql), rmu),
        "ql_r_mu": eq(ql.dot(rmu), ql),
        "r_mu_qr": eq(rmu.dot(qr), qr),
        "r_mu_idempotent": eq(rmu.dot(rmu), rmu),
    }
    failed = [k for k, v in conds.items() if not v]
    return PropertyReport("projectors", base.family, not failed, {"mu": pr.mu}, base.params_dict(),
                          0.0 if not failed else None, ", ".join(failed) or None)


# --------------------------------------------------------------------------
# chains
# --------------------------------------------------------------------------

def check_transfer_commutation(model: ModelSpec, L: int, boundary: str, x, y) -> PropertyReport:
    chain = ChainSpec(model, L, boundary)
    tx, ty = transfer_matrix(chain, x), transfer_matrix(chain, y)
    return compare("transfer_commutation", model, tx @ ty, ty @ tx,
                   {"x": model.scalar(x), "y": model.scalar(y)}, {"L": L, "boundary": boundary})


def check_m_t_commutation(model: ModelSpec, L: int, boundary: str, z, ops=None) -> PropertyReport:
    chain = ChainSpec(model, L, boundary)
    m = (ops or build_floquet(chain)).markov
    t = transfer_matrix(chain, z)
    return compare("markov_transfer_commutation", model, m @ t, t @ m,
                   {"z": model.scalar(z)}, {"L": L, "boundary": boundary})


def check_floquet_identity(model: ModelSpec, L: int, boundary: str, ops=None) -> PropertyReport:
    """Open: M = t(kappa).  Periodic: M = t(kappa^-1)^-1 t(kappa)."""
    chain = ChainSpec(model, L, boundary)
    m = (ops or build_floquet(chain)).markov
    kappa, kinv = model.staggered()
    if chain.is_open:
        rhs = transfer_matrix(chain, kappa)
    else:
        rhs = invert(transfer_matrix(chain, kinv)) @ transfer_matrix(chain, kappa)
    return compare("floquet_identity", model, m, rhs, {"kappa": kappa}, {"L": L, "boundary": boundary})


def check_half_steps(model: ModelSpec, L: int, boundary: str, ops=None):
    """Markov half-steps; the two half-step orders differ; periodic M conserves N."""
    chain = ChainSpec(model, L, boundary)
    ops = ops or build_floquet(chain)
    extra = {"L": L, "boundary": boundary}
    out = [check_stochastic(ops.markov, "markov_chain", model)]
    out[0].params.update(extra)
    differ = not (ops.u_odd @ ops.u_even == ops.u_even @ ops.u_odd)
    out.append(PropertyReport("half_steps_noncommuting", model.family, differ, {}, dict(model.params_dict(), **extra),
                              0.0 if differ else None, None if differ else "Uo Ue == Ue Uo"))
    if not chain.is_open:
        n = occupation_operator(L, model.s, model.exact)
        out.append(compare("particle_conservation", model, ops.markov @ n, n @ ops.markov, None, extra))
    return out


# --------------------------------------------------------------------------
# negative control
# --------------------------------------------------------------------------

@contextlib.contextmanager
def corrupted_r_matrix(entry=(1, 1), amount=CORRUPTION):
    """Temporarily shift one entry of every R-matrix; checks should then fail."""
    original = kernels.r_matrix

    def bad(model, z):
        op = original(model, z)
        data = op.data.copy()
        data[entry] = data[entry] + (amount if model.exact else float(amount))
        return Operator(data, op.dim_local, op.n_sites, op.exact)

    kernels.r_matrix = bad
    try:
        yield
    finally:
        kernels.r_matrix = original


# --------------------------------------------------------------------------
# suite
# --------------------------------------------------------------------------

def _families(names):
    if names in (None, "all"):
        return list(FAMILIES)
    if isinstance(names, str):
        names = [names]
    return [ModelSpec(f, t="1/2").family for f in names]


def algebraic_reports(model: ModelSpec, rng):
    """One sample of every one- and two-site identity for this model."""
    pt = lambda: random_point(model, rng)
    out = [check_ybe(model, pt(), pt(), pt()),
           check_reflection(model, pt(), pt()),
           check_reversed_reflection(model, pt(), pt()),
           check_dual_reflection(model, pt(), pt())]
    out += check_markov(model, pt())
    out += check_regularity(model)
    out += check_unitarity(model, pt())
    return out


def chain_reports(model: ModelSpec, L: int, boundary: str, rng, n_z: int = 1):
    chain = ChainSpec(model, L, boundary)
    ops = build_floquet(chain)
    out = [check_floquet_identity(model, L, boundary, ops)]
    out += check_half_steps(model, L, boundary, ops)
    for _ in range(n_z):
        out.append(_retry(lambda r: check_m_t_commutation(model, L, boundary, random_point(model, r), ops), rng))
    out.append(_retry(lambda r: check_transfer_commutation(
        model, L, boundary, random_point(model, r), random_point(model, r)), rng))
    return out


def default_chains(model: ModelSpec):
    if model.fused:
        return [(3, OPEN), (4, PERIODIC)]
    return [(3, OPEN), (5, OPEN), (4, PERIODIC)]


def run_suite(families="all", n_points: int = DEFAULT_POINTS, seed: int = 0,
              chains: bool = True, pinned: dict | None = None, corrupt: bool = False):
    """Run every identity check; returns reports in a deterministic order.

    ``pinned`` holds some model parameters fixed (e.g. ``{"t": "1/2"}``);
    the others are drawn at random for every sample.
    """
    rng = np.random.default_rng(seed)
    fams = _families(families)
    reports = []
    ctx = corrupted_r_matrix() if corrupt else contextlib.nullcontext()
    with ctx:
        for fam in fams:
            def model_of(r):
                return random_model(fam, r, pinned=pinned)
            for _ in range(n_points):
                reports += _retry(lambda r: algebraic_reports(model_of(r), r), rng)
            def at_point(check):
                def run(r):
                    m = model_of(r)
                    return check(m, random_point(m, r))
                return run
            for _ in range(n_points):
                reports.append(_retry(at_point(check_left_right_symmetry), rng))
            if not fam.startswith("fused"):
                reports.append(check_projectors(model_of(rng)))
                for _ in range(n_points):
                    reports += _retry(at_point(check_fusion), rng)
            for _ in range(max(1, n_points // 4)):
                reports.append(_retry(at_point(check_dual_roundtrip), rng))
            if chains:
                m = model_of(rng)
                for L, bc in default_chains(m):
                    reports += _retry(lambda r: chain_reports(m, L, bc, r), rng)
    return reports


def summarize(reports):
    """Group reports by (check, model): number run and number passed."""
    groups = {}
    for r in reports:
        key = (r.check, r.model)
        n, ok = groups.get(key, (0, 0))
        groups[key] = (n + 1, ok + bool(r.passed))
    return dict(sorted(groups.items()))


def timed_suite(**kw):
    t0 = time.perf_counter()
    reps = run_suite(**kw)
    return reps, time.perf_counter() - t0


def random_valid_model(family: str, rng, bound: int = 12, attempts: int = 2000) -> ModelSpec:
    """Random parameters whose local moves are all genuine probabilities.

    Small denominators keep exact matrix-product computations cheap; points
    where a generic move vanishes are rejected too.
    """
    from .chain import validate_parameters
    for _ in range(attempts):
        kw = {k: random_rational(rng, bound, lo=0, hi=3) for k in "abcd"}
        kw["kappa"] = random_rational(rng, bound, lo=0, hi=1)
        if family.endswith("asep"):
            kw["t"] = random_rational(rng, bound, lo=0, hi=1)
        try:
            model = ModelSpec(family, **kw)
            rep = validate_parameters(model)
        except (PoleError, ZeroDivisionError):
            continue
        if rep.mpa_ready and not rep.degenerate:
            return model
    raise RuntimeError(f"no valid {family} parameters found in {attempts} draws")
