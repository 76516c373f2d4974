from fractions import Fraction

import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given, strategies as st

from floquetex import kernels
from floquetex.kernels import ConventionError, ModelSpec, PoleError
from floquetex.tensor import Operator, SingularMatrixError, invert
from floquetex.verify import (
    check_dual_reflection, check_dual_roundtrip, check_fusion, check_left_right_symmetry,
    check_projectors, check_reflection, check_reversed_reflection, check_ybe,
)

pos = st.fractions(min_value=Fraction(1, 50), max_value=5, max_denominator=60)
unit = st.fractions(min_value=Fraction(1, 50), max_value=Fraction(49, 50), max_denominator=60)


def ssep_model(a, c, b, d):
    return ModelSpec("ssep", a=a, b=b, c=c, d=d)


def test_ssep_r_entries():
    # R(z) exchange block: z/(z+1) on the diagonal, 1/(z+1) off it
    r = kernels.r_matrix(ModelSpec("ssep"), mpq(3))
    assert r.data[1, 1] == mpq(3, 4) and r.data[1, 2] == mpq(1, 4)
    assert r.data[0, 0] == 1 and r.data[3, 3] == 1


def test_unknown_family():
    with pytest.raises(ValueError):
        ModelSpec("tasep")


def test_asymmetric_needs_t_in_unit_interval():
    with pytest.raises(ValueError):
        ModelSpec("asep")
    with pytest.raises(ValueError):
        ModelSpec("asep", t=2)


def test_conventions():
    s, a = ModelSpec("ssep"), ModelSpec("asep", t="1/2")
    assert s.regular == 0 and a.regular == 1
    assert s.inverse(mpq(2)) == -2 and a.inverse(mpq(2)) == mpq(1, 2)
    assert s.double(mpq(3)) == 6 and a.double(mpq(3)) == 9
    assert s.fusion_shifts(mpq(1)) == (mpq(1, 2), mpq(3, 2))
    assert a.fusion_shifts(mpq(1)) == (2, mpq(1, 2))
    with pytest.raises(ConventionError):
        kernels._require_convention(a, additive=True)


def test_pole_is_reported():
    with pytest.raises(PoleError):
        kernels.r_matrix(ModelSpec("ssep"), mpq(-1))


@pytest.mark.parametrize("family", ["ssep", "asep", "fused-ssep", "fused-asep"])
def test_columns_sum_to_one(family):
    m = ModelSpec(family, t="1/3", kappa="2/5", a="7/5", b="6/5", c="1/5", d="3/10")
    for z in (mpq(2, 7), mpq(5, 3)):
        for op in (kernels.r_matrix(m, z), kernels.k_left(m, z), kernels.k_right(m, z)):
            assert all(v == 1 for v in op.column_sums())


@given(pos, pos, pos, pos, pos, pos)
def test_ssep_reflection_property(a, c, b, d, z1, z2):
    m = ssep_model(a, c, b, d)
    try:
        assert check_reflection(m, z1, z2).passed
        assert check_reversed_reflection(m, z1, z2).passed
    except (PoleError, SingularMatrixError):
        pass


@given(unit, pos, pos, pos, pos, pos)
def test_asep_ybe_and_dual_property(t, z1, z2, z3, a, b):
    m = ModelSpec("asep", t=t, a=a, b=b, c="1/3", d="1/4")
    try:
        assert check_ybe(m, z1, z2, z3).passed
        assert check_dual_reflection(m, z1, z2).passed
    except (PoleError, SingularMatrixError):
        pass


@given(pos, st.sampled_from(["ssep", "asep"]), unit)
def test_fusion_matches_explicit(z, family, t):
    m = ModelSpec(family, t=t, a="3/2", b="5/4", c="1/3", d="2/7")
    try:
        reps = check_fusion(m, z)
    except (PoleError, SingularMatrixError):
        return
    assert all(r.passed for r in reps), [r.counterexample for r in reps]


@pytest.mark.parametrize("family", ["ssep", "asep"])
def test_projectors(family):
    assert check_projectors(ModelSpec(family, t="2/3")).passed


@pytest.mark.parametrize("family", ["ssep", "asep", "fused-ssep", "fused-asep"])
def test_left_right_symmetry_only_for_symmetric(family):
    m = ModelSpec(family, t="1/2")
    assert check_left_right_symmetry(m, mpq(3, 7)).passed


def test_dual_roundtrip():
    for fam in ("ssep", "asep", "fused-ssep", "fused-asep"):
        m = ModelSpec(fam, t="2/5", a="3/2", b="5/4", c="1/3", d="2/7")
        assert check_dual_roundtrip(m, mpq(3, 7)).passed


def test_r21_is_conjugate_by_swap():
    m = ModelSpec("asep", t="1/2")
    p = Operator.permutation(2)
    assert kernels.r21(m, mpq(3)) == p @ kernels.r_matrix(m, mpq(3)) @ p


def test_ssep_limit():
    for z in (0.5, 1.0, 2.0):
        assert kernels.ssep_limit_check(z, 1e-6) < 1e-4


def test_float_mode_close_to_exact():
    me = ModelSpec("fused-asep", t="1/3", kappa="1/2")
    mf = ModelSpec("fused-asep", t="1/3", kappa="1/2", exact=False)
    re, rf = kernels.r_matrix(me, "3/7"), kernels.r_matrix(mf, "3/7")
    assert re.to_float().equals(rf)
    assert np.allclose(invert(rf).data, invert(re).to_float().data)
