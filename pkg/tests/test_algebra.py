import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parabolic_dirac.algebra import (
    AlgebraError,
    BladeIndex,
    component_norm_sq,
    Multivector,
    conj,
    dimension,
    generators,
    left_matrix,
    parse,
    parse_blade,
    random_multivector,
    relation_defects,
    render,
    render_blade,
    right_matrix,
)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_relations_exact(m):
    defects = relation_defects(m)
    assert max(defects.values()) <= 1e-14, defects


@pytest.mark.parametrize("m", [1, 2, 3])
def test_dimension(m):
    assert dimension(m) == 4 * 2 ** m
    assert len(Multivector(m).coefficients) == dimension(m)


def test_basic_products():
    g = generators(2)
    e1, e2, f, fd = g["e1"], g["e2"], g["f"], g["f+"]
    one = Multivector.scalar(2)
    assert e1 * e1 == -1.0 * one
    assert e1 * e2 == -1.0 * (e2 * e1)
    assert (f * fd + fd * f) == one
    assert f * f == Multivector(2)
    # f f+ and f+ f are complementary idempotents
    p = f * fd
    assert p * p == p
    assert (fd * f) * (fd * f) == fd * f
    assert p * (fd * f) == Multivector(2)


def test_blade_roundtrip():
    for m in (1, 2, 3):
        for idx in range(dimension(m)):
            b = BladeIndex.from_index(m, idx)
            assert b.index(m) == idx
            assert parse_blade(render_blade(b)) == b


def test_parse_render_roundtrip():
    a = (Multivector.blade(3, "e1e3", 1.5) + Multivector.blade(3, "e2 f", 0.5 - 0.25j)
         + Multivector.scalar(3, 2.0))
    assert parse(3, render(a)).allclose(a, atol=0)
    assert parse(3, "(2+0j) 1 + (1.5+0j) e1e3 + -1j f+")["e1e3"] == 1.5
    assert render(Multivector(3)) == "0"


def test_parse_rejects_generator_beyond_m():
    with pytest.raises(AlgebraError):
        Multivector.blade(2, "e3")


def test_conj_rejects_witt():
    a = Multivector.blade(2, "f")
    with pytest.raises(AlgebraError):
        conj(a)


def test_conj_examples():
    m = 3
    e1 = Multivector.blade(m, "e1")
    e12 = Multivector.blade(m, "e1e2")
    e123 = Multivector.blade(m, "e1e2e3")
    assert conj(e1) == -1.0 * e1
    assert conj(e12) == -1.0 * e12
    assert conj(e123) == e123
    assert conj(Multivector.scalar(m, 2 + 1j)) == Multivector.scalar(m, 2 - 1j)


def test_left_right_matrices():
    rng = np.random.default_rng(3)
    a, x = random_multivector(2, rng), random_multivector(2, rng)
    np.testing.assert_allclose(left_matrix(a) @ x.coefficients, (a * x).coefficients, atol=1e-13)
    np.testing.assert_allclose(right_matrix(a) @ x.coefficients, (x * a).coefficients, atol=1e-13)


def test_ej_left_matrix_antihermitian():
    # e_j is unitary and squares to -1 in the coefficient pairing
    for m in (1, 2, 3):
        for j in range(1, m + 1):
            L = left_matrix(Multivector.blade(m, f"e{j}"))
            np.testing.assert_allclose(L.conj().T, -L, atol=0)


seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)
dims = st.integers(min_value=1, max_value=3)


@settings(max_examples=40, deadline=None)
@given(m=dims, seed=seeds)
def test_associativity(m, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_multivector(m, rng) for _ in range(3))
    lhs, rhs = (a * b) * c, a * (b * c)
    scale = np.linalg.norm(lhs.coefficients)
    assert np.linalg.norm(lhs.coefficients - rhs.coefficients) <= 1e-12 * max(scale, 1.0)


@settings(max_examples=40, deadline=None)
@given(m=dims, seed=seeds)
def test_bilinearity(m, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_multivector(m, rng) for _ in range(3))
    s = complex(rng.standard_normal(), rng.standard_normal())
    assert (a * (b + c * s)).allclose(a * b + (a * c) * s, atol=1e-12)
    assert ((b + c * s) * a).allclose(b * a + (c * a) * s, atol=1e-12)


def test_product_norm_constant():
    # observed ratio against the safe constant 4^(m+2) for squared component norms
    for m in (1, 2, 3):
        rng = np.random.default_rng(m)
        worst = 0.0
        for _ in range(200):
            a, b = random_multivector(m, rng), random_multivector(m, rng)
            worst = max(worst, component_norm_sq(a * b) / (component_norm_sq(a) * component_norm_sq(b)))
        assert worst <= 4 ** (m + 2)


@settings(max_examples=40, deadline=None)
@given(m=dims, seed=seeds)
def test_conj_involution_and_antiautomorphism(m, seed):
    rng = np.random.default_rng(seed)
    a = random_multivector(m, rng, witt=False)
    b = random_multivector(m, rng, witt=False)
    assert conj(conj(a)).allclose(a, atol=1e-14)
    assert conj(a * b).allclose(conj(b) * conj(a), atol=1e-12)
