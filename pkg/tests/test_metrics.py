import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from trotterzeno import (
    FitError,
    FockBasis,
    Schedule,
    SobolevWeight,
    annihilation,
    commutator_generator,
    dissipator,
    drift_diagnostics,
    drift_inequality_check,
    fit_order,
    flattened_operator_norm,
    maximally_mixed,
    moment_stability_check,
    number_operator,
    projector_superop,
    random_density_matrix,
    relative_bound_diagnostic,
    sobolev_norm,
    trace_norm,
    zeno_condition_check,
)
from trotterzeno.liouville import matrix_units
from trotterzeno.metrics import hs_norm
from trotterzeno.models import l_photon_dissipation

from .conftest import random_hermitian, random_matrix

seeds = st.integers(0, 2**32 - 1)


def test_trace_norm_trivial_cases():
    rho = random_density_matrix(FockBasis.single(5), np.random.default_rng(0))
    assert trace_norm(rho) == pytest.approx(1)
    assert trace_norm(np.diag([1.0, -1.0])) == pytest.approx(2)
    with pytest.raises(ValueError):
        trace_norm(np.array([[np.inf]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), seeds)
def test_trace_norm_paths_agree(dim, seed):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, dim)
    assert trace_norm(h) == pytest.approx(np.sum(scipy.linalg.svdvals(h)), abs=1e-11)
    g = random_matrix(rng, dim)
    assert trace_norm(g) == pytest.approx(np.sum(scipy.linalg.svdvals(g)), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), seeds, st.floats(-3, 3))
def test_trace_norm_axioms(dim, seed, c):
    rng = np.random.default_rng(seed)
    x, y = random_matrix(rng, dim), random_matrix(rng, dim)
    u, _ = np.linalg.qr(random_matrix(rng, dim))
    assert trace_norm(x + y) <= trace_norm(x) + trace_norm(y) + 1e-10
    assert trace_norm(c * x) == pytest.approx(abs(c) * trace_norm(x), abs=1e-10)
    assert trace_norm(u @ x @ u.conj().T) == pytest.approx(trace_norm(x), rel=1e-10)
    assert hs_norm(x) <= trace_norm(x) + 1e-12


def test_sobolev_weight():
    basis = FockBasis((3, 2))
    w = SobolevWeight(basis, (4.0, 2.0))
    n0, n1 = basis.occupations(0), basis.occupations(1)
    assert np.allclose(w.diagonal(), (1 + n0) * (1 + n1) ** 0.5)
    assert SobolevWeight(basis, 2.0).k == (2.0, 2.0)
    with pytest.raises(ValueError):
        SobolevWeight(basis, (-1.0, 0.0))


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 4), st.floats(0, 4), seeds)
def test_sobolev_norm_monotone_in_k(k1, k2, seed):
    basis = FockBasis.single(6)
    x = random_matrix(np.random.default_rng(seed), 6)
    lo, hi = sorted((k1, k2))
    assert sobolev_norm(x, SobolevWeight(basis, lo)) <= sobolev_norm(x, SobolevWeight(basis, hi)) * (1 + 1e-12)
    assert sobolev_norm(x, SobolevWeight(basis, 0.0)) == pytest.approx(trace_norm(x))


def test_one_to_one_norm_of_rank_one_projector():
    p = np.zeros((3, 3), dtype=complex)
    p[0, 0] = 1
    bounds = flattened_operator_norm(projector_superop(p).matrix(), "1")
    assert bounds.lower == pytest.approx(1, abs=1e-12)
    assert bounds.upper >= bounds.lower
    assert flattened_operator_norm(np.eye(9), "2") == pytest.approx(1)
    with pytest.raises(ValueError):
        flattened_operator_norm(np.eye(9), "inf")


def test_fit_order_exact_and_filters():
    n = np.array([4, 8, 16, 32])
    report = fit_order(n, 3.0 * n**-2.0)
    assert report.slope == pytest.approx(-2) and report.r_squared == pytest.approx(1)
    assert report.intercept == pytest.approx(np.log(3))
    errs = np.array([1e-2, 5e-3, 0.0, 1e-12, 1.25e-3])
    report = fit_order([1, 2, 3, 4, 8], errs, oracle_tol=1e-11)
    assert list(report.exact) == [False, False, True, False, False]
    assert list(report.saturated) == [False, False, False, True, False]
    assert report.to_dict()["used"] == [True, True, False, False, True]
    with pytest.raises(FitError, match="need at least 3"):
        fit_order([4, 8], [0.1, 0.05])
    with pytest.raises(ValueError):
        fit_order([4, 8, 16], [0.1, -1.0, 0.1])


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, -0.5), seeds)
def test_fit_order_recovers_planted_slope(slope, seed):
    rng = np.random.default_rng(seed)
    n = np.array([4, 8, 16, 32, 64, 128])
    errors = 0.5 * n**slope * (1 + 0.01 * rng.standard_normal(n.size))
    assert fit_order(n, errors).slope == pytest.approx(slope, abs=0.05)


def test_relative_bound_frozen_value():
    basis = FockBasis.single(12)
    gen = commutator_generator(number_operator(basis))
    w = SobolevWeight(basis, 4.0)
    x = np.zeros((12, 12), dtype=complex)
    x[0, 1] = x[1, 0] = 1
    # ||[N, x]||_1 = 2 and the weighted x has entries 1 * 2
    assert trace_norm(gen(x)) / sobolev_norm(x, w) == pytest.approx(0.5)
    report = relative_bound_diagnostic(gen, w, samples=4, levels=3)
    assert report["estimate"] >= 0.5 and "samples" in report["description"]


def test_moment_stability_omega_fit():
    basis = FockBasis.single(10)
    a = annihilation(basis)
    gen = dissipator(a)
    states = [u for u in matrix_units(10, range(9)) if np.linalg.eigvalsh(u).min() >= 0]
    report = moment_stability_check(gen, SobolevWeight(basis, 2.0), states)
    assert report.max_margin <= 1e-12
    # pure damping lowers every number moment
    assert report.omega <= 1e-12


def test_drift_inequality_two_photon():
    basis = FockBasis.single(20)
    gen = l_photon_dissipation(basis, 2, 1.0)
    levels = 20 - gen.leakage_margin()
    states = [np.diag(np.eye(20)[n]).astype(complex) for n in range(levels)]
    report = drift_inequality_check(gen, 2, 1.0, 2.0, states)
    assert report.admissible_levels == levels and report.max_margin <= 1e-9
    # the fitted constant is attained by the top eigenvector of the growth block
    n1 = np.arange(20) + 1.0
    growth = gen.adjoint(np.diag(n1).astype(complex)) + np.diag(n1**2)
    _, vecs = np.linalg.eigh(growth[:levels, :levels])
    psi = np.zeros(20, dtype=complex)
    psi[:levels] = vecs[:, -1]
    top = np.outer(psi, psi.conj())
    assert drift_inequality_check(gen, 2, 1.0, 2.0, [top]).max_margin == pytest.approx(0, abs=1e-9)
    tight = drift_inequality_check(gen, 2, 1.0, 2.0, [top], constant=report.constant - 1.0)
    assert tight.max_margin == pytest.approx(1.0)
    with pytest.raises(ValueError):
        drift_inequality_check(gen, 2, 1.0, 2.0, [np.eye(20) / 20])


def test_zeno_condition_grows_linearly():
    basis = FockBasis.single(6)
    a = annihilation(basis)
    p = np.zeros((6, 6), dtype=complex)
    p[0, 0] = p[1, 1] = 1
    schedule = Schedule.constant(commutator_generator(a + a.conj().T), 1.0)
    times = [0.0, 0.1, 0.2, 0.4]
    report = zeno_condition_check(projector_superop(p), schedule, times)
    assert len(report.pairs) == 6 and np.isfinite(report.b) and report.b > 0
    for t, s, up, low in report.pairs:
        assert max(up, low) <= report.b * (t - s) + 1e-12
    with pytest.raises(ValueError):
        zeno_condition_check(projector_superop(p), schedule, [0.1])


def test_drift_diagnostics():
    basis = FockBasis.single(8)
    diag = drift_diagnostics(maximally_mixed(basis), basis)
    assert diag.trace_drift == pytest.approx(0, abs=1e-15)
    assert diag.min_eig == pytest.approx(1 / 8)
    assert diag.top_level_mass == (pytest.approx(2 / 8),)
    two = FockBasis((3, 4))
    masses = drift_diagnostics(maximally_mixed(two), two).top_level_mass
    assert masses == (pytest.approx(2 / 3), pytest.approx(2 / 4))
