import json

import numpy as np
import pytest
from gmpy2 import mpq

from floquetex.chain import PERIODIC, ChainSpec, build_floquet
from floquetex.kernels import ModelSpec
from floquetex.observables import (
    current_closed, current_mpa, density_closed, filling_closed, observables_closed,
    observables_eigensolve, observables_mpa, rising_factorial, z_l_closed, z_l_mpa,
)
from floquetex.stationary import sector_states
from floquetex.verify import random_valid_model

import oracles

REF = ModelSpec("ssep", kappa="1/2")


def test_rising_factorial():
    assert rising_factorial(mpq(2), 3) == 24
    assert rising_factorial(mpq(1, 2), 0) == 1


def test_reference_point_closed_forms():
    rep = observables_closed(REF, 3)
    assert rep.Z_L == 24
    assert rep.density == [mpq(3, 4), mpq(1, 2), mpq(1, 4)]
    assert rep.current == mpq(1, 4)


def test_reference_point_eigensolve():
    rep = observables_eigensolve(ChainSpec(REF, 3))
    assert rep.density == [mpq(3, 4), mpq(1, 2), mpq(1, 4)]
    assert rep.current == mpq(1, 4)
    assert set(rep.bond_currents) == {mpq(1, 4)}
    assert rep.injection == rep.extraction == mpq(1, 4)


@pytest.mark.parametrize("L", [1, 3, 5])
def test_ssep_closed_forms_against_gamma_oracle(L):
    rng = np.random.default_rng(L)
    m = random_valid_model("ssep", rng)
    f = oracles.frac
    assert f(z_l_closed(m, L)) == oracles.ssep_z(f(m.a), f(m.b), f(m.c), f(m.d), L)
    for i in range(1, L + 1):
        assert f(density_closed(m, L, i)) == oracles.ssep_density(f(m.a), f(m.b), f(m.c), f(m.d), L, i)
    assert f(current_closed(m, L)) == oracles.ssep_current(f(m.kappa), f(m.a), f(m.b), f(m.c), f(m.d), L)


@pytest.mark.parametrize("family,L", [("ssep", 3), ("ssep", 5), ("fused-ssep", 3)])
def test_closed_forms_against_eigensolve(family, L):
    m = random_valid_model(family, np.random.default_rng(11))
    chain = ChainSpec(m, L)
    eig = observables_eigensolve(chain)
    clo = observables_closed(m, L)
    assert eig.density == clo.density
    assert eig.current == clo.current
    assert set(eig.bond_currents) == {clo.current}
    assert z_l_mpa(m, L) == clo.Z_L


def test_fused_density_is_twice_the_filling():
    m = ModelSpec("fused-ssep", kappa="1/2")
    assert filling_closed(m, 3, 1) == mpq(11, 14)
    assert density_closed(m, 3, 1) == mpq(11, 7)
    assert current_closed(m, 3) == mpq(2, 7)


@pytest.mark.parametrize("family,L", [("asep", 3), ("asep", 5), ("fused-asep", 3)])
def test_current_formula_against_bond_flux(family, L):
    m = random_valid_model(family, np.random.default_rng(3))
    eig = observables_eigensolve(ChainSpec(m, L))
    j = current_mpa(m, L)
    assert set(eig.bond_currents) == {j}
    assert eig.injection == eig.extraction == j


def test_mpa_report_matches_eigensolve():
    m = ModelSpec("asep", kappa="1/2", t="1/2", a="3", b="3", c="1/2", d="1/5")
    chain = ChainSpec(m, 3)
    a, b = observables_mpa(chain), observables_eigensolve(chain)
    assert a.density == b.density and a.bond_currents == b.bond_currents
    assert a.extra["J_formula"] == str(b.current)


def test_density_against_fraction_oracle():
    m = ModelSpec("fused-asep", kappa="1/2", t="2/3", a="2", b="3", c="1/2", d="1/5")
    chain = ChainSpec(m, 3)
    ops = build_floquet(chain)
    p = oracles.stationary_fraction(oracles.frac_matrix(ops.markov))
    pp = oracles.matvec(oracles.frac_matrix(ops.u_odd), p)
    want = [(x + y) / 2 for x, y in zip(oracles.density_oracle(p, 3, 3), oracles.density_oracle(pp, 3, 3))]
    got = observables_eigensolve(chain).density
    assert [oracles.frac(v) for v in got] == want


def test_periodic_current_is_uniform():
    m = ModelSpec("asep", kappa="1/2", t="1/2")
    chain = ChainSpec(m, 4, PERIODIC)
    rep = observables_eigensolve(chain, sector_states(4, 1, 2))
    assert len(set(rep.bond_currents)) == 1
    assert rep.current > 0
    assert sum(rep.density) == 2


def test_report_json():
    doc = json.loads(observables_closed(REF, 3).to_json())
    assert doc["J"] == "1/4" and doc["Z_L"] == "24" and doc["method"] == "closed_form"


def test_closed_form_refuses_asymmetric():
    with pytest.raises(ValueError):
        observables_closed(ModelSpec("asep", t="1/2"), 3)
