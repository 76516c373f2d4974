import numpy as np
import pytest
from gmpy2 import mpq

from floquetex.chain import PERIODIC, ChainSpec, build_floquet
from floquetex.kernels import ModelSpec
from floquetex.stationary import (
    NotStochasticError, ReducibleChainError, StationaryState, communicating_classes,
    sector_states, stationary_eigensolve,
)
from floquetex.tensor import Operator
from floquetex.verify import random_valid_model

import oracles


def op(rows):
    return Operator(np.array([[mpq(v) for v in r] for r in rows], dtype=object), len(rows), 1, True)


def test_two_state_chain():
    m = op([["1/2", "1/3"], ["1/2", "2/3"]])
    s = stationary_eigensolve(m)
    assert list(s.probabilities) == [mpq(2, 5), mpq(3, 5)]


def test_transient_state_gets_zero():
    m = op([["1/2", 0, 0], ["1/2", "1/2", "1/2"], [0, "1/2", "1/2"]])
    s = stationary_eigensolve(m)
    assert s.probabilities[0] == 0


def test_two_closed_classes_refused():
    with pytest.raises(ReducibleChainError) as err:
        stationary_eigensolve(op([[1, 0], [0, 1]]))
    assert len(err.value.closed) == 2


def test_not_stochastic_refused():
    with pytest.raises(NotStochasticError):
        stationary_eigensolve(op([["1/2", 0], ["1/3", 1]]))


def test_state_validation():
    with pytest.raises(ValueError):
        StationaryState(np.array([mpq(1, 2), mpq(1, 3)], dtype=object), 2, 1)
    with pytest.raises(ValueError):
        StationaryState(np.array([mpq(3, 2), mpq(-1, 2)], dtype=object), 2, 1)


def test_classes_of_cycle():
    m = op([[0, 1], [1, 0]])
    assert len(communicating_classes(m)) == 1


@pytest.mark.parametrize("family", ["ssep", "asep", "fused-ssep", "fused-asep"])
def test_eigensolve_against_fraction_oracle(family):
    rng = np.random.default_rng(7)
    model = random_valid_model(family, rng)
    ops = build_floquet(ChainSpec(model, 3))
    s = stationary_eigensolve(ops.markov)
    ref = oracles.stationary_fraction(oracles.frac_matrix(ops.markov))
    assert [oracles.frac(v) for v in s.probabilities] == ref


def test_periodic_sector_is_uniform_for_ssep():
    # symmetric bulk moves are doubly stochastic within a sector
    m = ModelSpec("ssep", kappa="1/3")
    ops = build_floquet(ChainSpec(m, 4, PERIODIC))
    states = sector_states(4, 1, 2)
    s = stationary_eigensolve(ops.markov, states, 4)
    assert {s.probabilities[i] for i in states} == {mpq(1, 6)}


def test_sector_must_be_closed():
    ops = build_floquet(ChainSpec(ModelSpec("ssep"), 3))
    with pytest.raises(ValueError):
        stationary_eigensolve(ops.markov, [0, 1])


def test_float_eigensolve_close_to_exact():
    me = ModelSpec("asep", kappa="1/2", t="1/2", a="3", b="3", c="1/2", d="1/5")
    mf = ModelSpec("asep", kappa="1/2", t="1/2", a="3", b="3", c="1/2", d="1/5", exact=False)
    se = stationary_eigensolve(build_floquet(ChainSpec(me, 5)).markov)
    sf = stationary_eigensolve(build_floquet(ChainSpec(mf, 5)).markov)
    assert se.equals(sf)
