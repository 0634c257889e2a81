import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trotterzeno import (
    FockBasis,
    NumericalError,
    PropagatorCache,
    Schedule,
    StepSizeUnderflow,
    annihilation,
    commutator_generator,
    dissipator,
    expm,
    flatten,
    gksl,
    number_operator,
    random_density_matrix,
    reference_evolution,
    semigroup_step,
    trace_norm,
)
from trotterzeno.propagators import (
    block_expm,
    constant,
    evolution_matrix,
    orbit,
    propagator,
    taylor_action,
    validate_reference,
)

from .conftest import random_hermitian, random_matrix

seeds = st.integers(0, 2**32 - 1)


def _ou(cutoff=12, lam=1.0, mu=0.5):
    a = annihilation(FockBasis.single(cutoff))
    return gksl(jumps=[lam * a, mu * a.conj().T])


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), seeds)
def test_block_expm_matches_expm(dim, seed):
    rng = np.random.default_rng(seed)
    a = random_matrix(rng, dim) * (rng.random((dim, dim)) < 0.3)
    assert np.allclose(block_expm(a, 0.7), expm(a, 0.7), atol=1e-12)


def test_expm_rejects_non_finite():
    with pytest.raises(NumericalError):
        expm(np.array([[np.nan]]))
    with pytest.raises(NumericalError):
        expm(np.array([[1e3]]), 10.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 6), seeds, st.floats(-2.0, 2.0))
def test_unitary_route_matches_flattened(dim, seed, t):
    rng = np.random.default_rng(seed)
    gen = commutator_generator(random_hermitian(rng, dim))
    x = random_matrix(rng, dim)
    flat = expm(flatten(gen).matrix, t)
    assert propagator(gen, t).kind == "unitary"
    assert np.allclose(propagator(gen, t)(x), (flat @ x.flatten("F")).reshape(dim, dim, order="F"), atol=1e-11)


def test_dense_and_taylor_routes_agree():
    gen = _ou(10)
    x = random_density_matrix(FockBasis.single(10), np.random.default_rng(0))
    dense = propagator(gen, 0.8)
    action = propagator(gen, 0.8, dense_limit=4)
    assert dense.kind == "dense" and action.kind == "action"
    assert trace_norm(dense(x) - action(x)) < 1e-11
    assert trace_norm(taylor_action(gen, 0.8, x) - dense(x)) < 1e-11


def test_negative_time_only_for_commutators():
    with pytest.raises(ValueError, match="negative"):
        propagator(_ou(4), -0.1)
    h = number_operator(FockBasis.single(4))
    x = random_matrix(np.random.default_rng(1), 4)
    gen = commutator_generator(h)
    back = semigroup_step(gen, -0.3, semigroup_step(gen, 0.3, x))
    assert np.allclose(back, x)


def test_cache_returns_same_object():
    cache = PropagatorCache()
    gen = _ou(6)
    p1 = propagator(gen, 0.1, cache=cache)
    p2 = propagator(_ou(6), 0.1, cache=cache)
    assert p1 is p2 and cache.hits == 1 and cache.misses == 1
    propagator(gen, 0.2, cache=cache)
    assert len(cache) == 2


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 5), seeds)
def test_semigroup_is_cptp(dim, seed):
    rng = np.random.default_rng(seed)
    gen = gksl(random_hermitian(rng, dim), [random_matrix(rng, dim, 0.7) for _ in range(2)])
    rho = random_density_matrix(FockBasis.single(dim), rng)
    out = semigroup_step(gen, 1.3, rho)
    assert np.trace(out).real == pytest.approx(1, abs=1e-12)
    assert np.linalg.eigvalsh((out + out.conj().T) / 2).min() > -1e-12
    # Choi matrix of the channel is positive
    choi = flatten(gen).matrix
    m = expm(choi, 1.3).reshape(dim, dim, dim, dim, order="F")
    c = m.transpose(0, 2, 1, 3).reshape(dim * dim, dim * dim)
    assert np.linalg.eigvalsh((c + c.conj().T) / 2).min() > -1e-10


def test_reference_evolution_matches_expm_for_constant_schedule():
    gen = _ou(10)
    x = random_density_matrix(FockBasis.single(10), np.random.default_rng(2))
    exact = semigroup_step(gen, 1.0, x)
    approx = reference_evolution(Schedule.constant(gen, 1.0), 0.0, 1.0, x, tol=1e-11)
    assert trace_norm(exact - approx) < 1e-10


def test_time_dependent_number_phase():
    # d/dt x = -i f(t) [N, x] gives x_mn(t) = exp(-i (m - n) F(t)) x_mn(0), F' = f
    basis = FockBasis.single(6)
    omega = 3.0
    schedule = Schedule(((lambda t: np.cos(omega * t), commutator_generator(number_operator(basis))),), 1.0)
    x = random_matrix(np.random.default_rng(3), 6)
    big_f = np.sin(omega * 1.0) / omega
    m = np.arange(6)
    expected = np.exp(-1j * np.subtract.outer(m, m) * big_f) * x
    out = reference_evolution(schedule, 0.0, 1.0, x, tol=1e-12)
    assert trace_norm(out - expected) < 1e-10


def test_cocycle_property():
    basis = FockBasis.single(5)
    a = annihilation(basis)
    schedule = Schedule(
        (
            (lambda t: 1 + 0.5 * np.sin(2 * t), commutator_generator(a + a.conj().T)),
            (lambda t: 0.3 + 0.2 * np.cos(t), dissipator(a)),
        ),
        2.0,
    )
    x = random_density_matrix(basis, np.random.default_rng(4))
    direct = reference_evolution(schedule, 0.2, 1.7, x)
    split = reference_evolution(schedule, 0.9, 1.7, reference_evolution(schedule, 0.2, 0.9, x))
    assert trace_norm(direct - split) < 5e-11
    assert validate_reference(schedule, 0.0, 1.0, x) < 2e-11


def test_reference_evolution_errors():
    schedule = Schedule.constant(_ou(6), 1.0)
    x = np.eye(6) / 6
    with pytest.raises(ValueError):
        reference_evolution(schedule, 0.0, 1.0, x, tol=1e-15)
    with pytest.raises(ValueError):
        reference_evolution(schedule, 0.0, 2.0, x)
    with pytest.raises(StepSizeUnderflow) as info:
        reference_evolution(schedule, 0.0, 1.0, x, max_steps=2)
    assert 0.0 <= info.value.last_time < 1.0


def test_schedule_rules():
    basis = FockBasis.single(4)
    a = annihilation(basis)
    schedule = Schedule(((lambda t: -1.0, dissipator(a)),), 1.0)
    with pytest.raises(ValueError, match="negative rate"):
        schedule.action(0.5, np.eye(4))
    step = Schedule(((lambda t: float(t > 0.5), commutator_generator(a + a.conj().T)),), 1.0)
    with pytest.raises(ValueError, match="discontinuous"):
        step.check_continuity()
    Schedule.constant(dissipator(a), 1.0).check_continuity()
    with pytest.raises(ValueError):
        Schedule(((constant(1.0), dissipator(a)), (constant(1.0), dissipator(np.eye(3)))), 1.0)
    combined = Schedule.constant(dissipator(a), 2.0) + Schedule.zero(4, 1.0)
    assert combined.horizon == 1.0 and combined.autonomous


def test_evolution_matrix_routes_agree():
    gen = _ou(4)
    exact = evolution_matrix(Schedule.constant(gen, 1.0), 0.8, 0.1)
    # a plain lambda is not recognized as constant, forcing column-wise integration
    columnwise = evolution_matrix(Schedule(((lambda t: 1.0, gen),), 1.0), 0.8, 0.1, tol=1e-12)
    assert np.allclose(exact, columnwise, atol=1e-10)


def test_orbit():
    gen = _ou(6)
    x = np.diag([0, 1, 0, 0, 0, 0]).astype(complex)
    states = orbit(gen, np.linspace(0, 1, 5), x)
    assert trace_norm(states[-1] - semigroup_step(gen, 1.0, x)) < 1e-12
    with pytest.raises(ValueError):
        orbit(gen, [0.0, 0.1, 0.3], x)
    with pytest.raises(ValueError):
        orbit(gen, [0.1, 0.2], x)
