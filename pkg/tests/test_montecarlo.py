import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floquetex.chain import PERIODIC, ChainSpec, boundary_updates, local_update
from floquetex.kernels import ModelSpec
from floquetex.montecarlo import (
    MCConfig, cumulative_table, initial_configuration, mc_run, run_replica, stream_key, uniforms,
)

import oracles

ASEP = ModelSpec("asep", kappa="1/2", t="1/2", a="3", b="3", c="1/2", d="1/5", exact=False)
FASEP = ModelSpec("fused-asep", kappa="1/2", t="2/3", a="2", b="3", c="1/2", d="1/5", exact=False)


@given(st.integers(0, 2 ** 63), st.integers(0, 100), st.integers(0, 10 ** 6), st.integers(0, 1))
@settings(max_examples=30)
def test_uniforms_in_unit_interval(seed, rep, period, phase):
    u = uniforms(seed, rep, period, phase, 16)
    assert np.all((u >= 0) & (u < 1))
    assert np.array_equal(u, uniforms(seed, rep, period, phase, 16))


def test_streams_differ():
    a = uniforms(1, 0, 0, 0, 64)
    assert not np.array_equal(a, uniforms(1, 1, 0, 0, 64))
    assert not np.array_equal(a, uniforms(1, 0, 0, 1, 64))
    assert not np.array_equal(a, uniforms(2, 0, 0, 0, 64))


def test_uniforms_look_uniform():
    u = np.concatenate([uniforms(5, 0, p, 0, 100) for p in range(200)])
    assert abs(u.mean() - 0.5) < 0.01
    hist, _ = np.histogram(u, bins=10, range=(0, 1))
    assert hist.min() > 1800


@pytest.mark.parametrize("model,L,bc", [(ASEP, 5, "open"), (FASEP, 3, "open"), (ASEP, 6, PERIODIC)])
def test_kernel_matches_python_replay(model, L, bc):
    chain = ChainSpec(model, L, bc)
    cum_u = cumulative_table(local_update(model))
    if chain.is_open:
        b, bb = boundary_updates(model)
        cum_b, cum_bb = cumulative_table(b), cumulative_table(bb)
    else:
        cum_b = cum_bb = np.ones((model.dim_local, model.dim_local))
    tau0 = initial_configuration(chain)
    key = np.uint64(stream_key(np.uint64(9), np.uint64(0)))
    occ_s, occ_sp, *_ = run_replica(tau0, model.dim_local, chain.is_open, cum_u, cum_b, cum_bb, key, 0, 50)
    ref_s, ref_sp = oracles.replay_monte_carlo(
        tau0, model.dim_local, chain.is_open, cum_u, cum_b, cum_bb,
        lambda p, ph, n: uniforms(9, 0, p, ph, n), 50)
    assert np.array_equal(occ_s, ref_s) and np.array_equal(occ_sp, ref_sp)


def test_initial_configuration():
    ring = ChainSpec(ASEP, 6, PERIODIC)
    assert initial_configuration(ring).sum() == 3
    assert initial_configuration(ring, 4).sum() == 4
    assert initial_configuration(ChainSpec(FASEP, 4, PERIODIC), 7).sum() == 7
    with pytest.raises(ValueError):
        initial_configuration(ring, 7)


def test_config_validation():
    with pytest.raises(ValueError):
        MCConfig(measure=0)
    with pytest.raises(ValueError):
        MCConfig(replicas=0)
    with pytest.raises(ValueError):
        MCConfig(seed=-1)


def test_invalid_parameters_refused():
    bad = ModelSpec("asep", kappa="1/2", t="1/2", a="1", b="3", c="0", d="1/5", exact=False)
    with pytest.raises(ValueError):
        mc_run(ChainSpec(bad, 3), MCConfig(measure=10))


def test_determinism_and_thread_independence():
    chain = ChainSpec(ASEP, 5)
    a = mc_run(chain, MCConfig(seed=3, burn_in=10, measure=2000, replicas=4, threads=1))
    b = mc_run(chain, MCConfig(seed=3, burn_in=10, measure=2000, replicas=4, threads=3))
    assert a.to_json() == b.to_json()
    c = mc_run(chain, MCConfig(seed=4, burn_in=10, measure=2000, replicas=4))
    assert a.to_json() != c.to_json()


def test_periodic_conserves_particles():
    chain = ChainSpec(FASEP, 4, PERIODIC)
    rep = mc_run(chain, MCConfig(seed=1, burn_in=0, measure=500, particles=5))
    assert sum(rep.density) == pytest.approx(5.0)
    assert rep.extra["particles"] == 5


def test_open_chain_fluxes_balance():
    rep = mc_run(ChainSpec(ASEP, 5), MCConfig(seed=2, burn_in=100, measure=20000, replicas=2))
    # injected minus extracted is bounded by the lattice capacity over the run
    assert abs(rep.injection - rep.extraction) * 20000 <= 5
    assert rep.current_stderr is not None
