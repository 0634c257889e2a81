import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trotterzeno import (
    DenseLimitError,
    FockBasis,
    annihilation,
    commutator_generator,
    conjugation_superop,
    dissipator,
    flatten,
    gksl,
    number_operator,
    projector_superop,
    unvec,
    vec,
)
from trotterzeno.liouville import Liouvillian, matrix_units

from .conftest import random_hermitian, random_matrix

seeds = st.integers(0, 2**32 - 1)


def _random_gksl(rng, dim, jumps=2):
    return gksl(random_hermitian(rng, dim), [random_matrix(rng, dim, 0.5) for _ in range(jumps)])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), seeds)
def test_vec_of_product(dim, seed):
    rng = np.random.default_rng(seed)
    a, x, b = (random_matrix(rng, dim) for _ in range(3))
    assert np.allclose(vec(a @ x @ b), np.kron(b.T, a) @ vec(x))
    assert np.allclose(unvec(vec(x)), x)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), seeds)
def test_flatten_matches_action(dim, seed):
    rng = np.random.default_rng(seed)
    gen = _random_gksl(rng, dim)
    x = random_matrix(rng, dim)
    assert np.allclose(flatten(gen).matrix @ vec(x), vec(gen(x)))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), seeds)
def test_adjoint_pairing_and_trace_annihilation(dim, seed):
    rng = np.random.default_rng(seed)
    gen = _random_gksl(rng, dim)
    x, obs = random_matrix(rng, dim), random_matrix(rng, dim)
    assert np.trace(obs @ gen(x)) == pytest.approx(np.trace(gen.adjoint(obs) @ x), abs=1e-9)
    assert abs(np.trace(gen(x))) < 1e-10
    assert np.allclose(gen.adjoint(np.eye(dim)), 0, atol=1e-12)


def test_commutator_and_dissipator_formulas():
    rng = np.random.default_rng(0)
    h, lj, x = random_hermitian(rng, 4), random_matrix(rng, 4), random_matrix(rng, 4)
    assert np.allclose(commutator_generator(h)(x), -1j * (h @ x - x @ h))
    k = lj.conj().T @ lj
    assert np.allclose(dissipator(lj)(x), lj @ x @ lj.conj().T - 0.5 * (k @ x + x @ k))
    full = gksl(h, [lj])
    assert np.allclose(full(x), commutator_generator(h)(x) + dissipator(lj)(x))
    assert np.allclose((commutator_generator(h) + dissipator(lj))(x), full(x))


def test_scaling_rules():
    rng = np.random.default_rng(1)
    h, lj, x = random_hermitian(rng, 3), random_matrix(rng, 3), random_matrix(rng, 3)
    assert np.allclose((2.5 * gksl(h, [lj]))(x), 2.5 * gksl(h, [lj])(x))
    assert np.allclose(commutator_generator(h).scaled(-1)(x), -commutator_generator(h)(x))
    with pytest.raises(ValueError):
        dissipator(lj).scaled(-1)


def test_non_hermitian_hamiltonian_rejected():
    with pytest.raises(ValueError):
        commutator_generator(np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(ValueError):
        gksl(np.array([[0, 1], [0, 0]], dtype=complex))


def test_key_identifies_content():
    h = np.diag([1.0, 2.0]).astype(complex)
    assert commutator_generator(h).key == commutator_generator(h.copy()).key
    assert commutator_generator(h).key != commutator_generator(2 * h).key
    assert Liouvillian.zero(2).is_commutator


def test_dense_limit():
    gen = commutator_generator(np.zeros((65, 65)))
    with pytest.raises(DenseLimitError):
        flatten(gen)
    assert flatten(gen, dense_limit=65).matrix.shape == (65**2, 65**2)


def test_projector_superop():
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(random_matrix(rng, 5))
    v = q[:, :2]
    proj = projector_superop(v @ v.conj().T)
    x = random_matrix(rng, 5)
    assert proj.orthogonal
    assert np.allclose(proj.matrix() @ vec(x), vec(proj(x)))
    assert np.allclose(proj(proj(x)), proj(x))
    assert np.allclose(proj.complement(x) + proj(x), x)
    b = proj.range_basis()
    assert b.shape == (25, 4)
    assert np.allclose(b.conj().T @ b, np.eye(4))
    assert np.allclose(b @ b.conj().T, proj.matrix())
    with pytest.raises(ValueError):
        projector_superop(np.array([[1.0, 0], [0, 0.5]]))


def test_conjugation_superop():
    rng = np.random.default_rng(3)
    u, _ = np.linalg.qr(random_matrix(rng, 3))
    x = random_matrix(rng, 3)
    assert np.allclose(conjugation_superop(u).matrix @ vec(x), vec(u @ x @ u.conj().T))


def test_leakage_margin():
    basis = FockBasis.single(8)
    a = annihilation(basis)
    assert dissipator(a).leakage_margin() == 1
    assert dissipator(a @ a).leakage_margin() == 2
    assert commutator_generator(number_operator(basis)).leakage_margin() == 0


def test_matrix_units():
    herm = list(matrix_units(4, range(3)))
    assert len(herm) == 9
    assert all(np.allclose(u, u.conj().T) for u in herm)
    assert all(np.all(u[3:, :] == 0) and np.all(u[:, 3:] == 0) for u in herm)
    assert len(list(matrix_units(3, hermitian=False))) == 9
