import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trotterzeno import (
    FockBasis,
    Partition,
    Schedule,
    SplittingScheme,
    ZenoSpec,
    annihilation,
    commutator_generator,
    dissipator,
    expm,
    flatten,
    gksl,
    make_uniform_power_contraction,
    number_operator,
    projector_superop,
    random_density_matrix,
    semigroup_step,
    strang_product,
    suzuki_product,
    telescopic_defect,
    time_dependent_trotter,
    trace_norm,
    trotter_product,
    unvec,
    vec,
    zeno_product,
    zeno_product_general,
)
from trotterzeno.schemes import (
    compressed_generator_propagator,
    conjugation_mixer,
    random_complement_unitary,
    scheme_step_map,
    semigroup_step_map,
    trotter_step_map,
    zeno_step_map,
)

from .conftest import random_hermitian, random_matrix

seeds = st.integers(0, 2**32 - 1)


def test_suzuki_coefficient_frozen():
    p = 1 / (4 - 4 ** (1 / 3))
    assert p == pytest.approx(0.41449077179437573, abs=1e-16)
    s4 = SplittingScheme.suzuki(4)
    assert len(s4.stages) == 11
    assert s4.stages[0] == ("B", pytest.approx(p / 2))
    assert s4.stages[5] == ("A", pytest.approx(1 - 4 * p))
    assert s4.reversible_only and not SplittingScheme.strang().reversible_only
    for tag in "AB":
        assert sum(c for t, c in s4.stages if t == tag) == 1.0
    assert SplittingScheme.suzuki(2).stages == SplittingScheme.strang().stages


def test_scheme_validation():
    with pytest.raises(ValueError):
        SplittingScheme((("A", 1.0),), 1)
    with pytest.raises(ValueError):
        SplittingScheme((("C", 1.0), ("B", 1.0)), 1)
    with pytest.raises(ValueError):
        SplittingScheme.suzuki(3)
    with pytest.raises(ValueError):
        SplittingScheme.from_name("leapfrog")
    assert SplittingScheme.from_name("Suzuki6").order == 6


def test_rightmost_stage_acts_first():
    rng = np.random.default_rng(0)
    ha, hb = random_hermitian(rng, 3), random_hermitian(rng, 3)
    a, b = commutator_generator(ha), commutator_generator(hb)
    x = random_matrix(rng, 3)
    ua, ub = expm(ha, -0.3j), expm(hb, -0.3j)
    expected = ua @ ub @ x @ (ua @ ub).conj().T
    assert np.allclose(SplittingScheme.trotter().step(a, b, 0.3, x), expected)


def test_negative_stages_need_commutators():
    a = annihilation(FockBasis.single(4))
    with pytest.raises(ValueError, match="commutator"):
        SplittingScheme.suzuki(4).step(dissipator(a), commutator_generator(a + a.conj().T), 0.1, np.eye(4))


def _order_estimate(scheme, a, b, x, t=1.0, n=16):
    exact = semigroup_step(a + b, t, x)
    e1 = trace_norm(suzuki_product(scheme, a, b, t, n, x) - exact)
    e2 = trace_norm(suzuki_product(scheme, a, b, t, 2 * n, x) - exact)
    return np.log2(e1 / e2)


@pytest.mark.parametrize("name,order", [("trotter", 1), ("strang", 2), ("suzuki4", 4)])
def test_empirical_order_random_commutators(name, order):
    rng = np.random.default_rng(5)
    a = commutator_generator(random_hermitian(rng, 4, 0.5))
    b = commutator_generator(random_hermitian(rng, 4, 0.5))
    x = random_density_matrix(FockBasis.single(4), rng)
    assert _order_estimate(SplittingScheme.from_name(name), a, b, x) == pytest.approx(order, abs=0.15)


def test_strang_order_dissipative():
    basis = FockBasis.single(8)
    a = annihilation(basis)
    rng = np.random.default_rng(6)
    x = random_density_matrix(basis, rng)
    est = _order_estimate(SplittingScheme.strang(), dissipator(a), dissipator(0.5 * a.conj().T), x)
    assert est == pytest.approx(2, abs=0.15)


def test_commuting_generators_exact():
    basis = FockBasis((4, 4))
    a = commutator_generator(number_operator(basis, 0))
    b = commutator_generator(0.7 * number_operator(basis, 1))
    x = random_density_matrix(basis, np.random.default_rng(7))
    exact = semigroup_step(a + b, 1.3, x)
    for n in (1, 3, 8):
        assert trace_norm(trotter_product(a, b, 1.3, n, x) - exact) < 1e-12
        assert trace_norm(strang_product(a, b, 1.3, n, x) - exact) < 1e-12


def test_partition():
    p = Partition.uniform(1.0, 4, start=0.5)
    assert p.n == 4 and p.start == 0.5 and p.end == pytest.approx(1.5)
    assert p.max_step == pytest.approx(0.25)
    q = Partition.from_steps([0.1, 0.4, 0.2])
    assert q.max_step == pytest.approx(0.4) and q.intervals()[1] == pytest.approx((0.1, 0.5))
    with pytest.raises(ValueError):
        Partition((0.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        Partition.uniform(1.0, 0)


def test_time_dependent_trotter_reduces_to_constant_case():
    basis = FockBasis.single(6)
    a = annihilation(basis)
    u = commutator_generator(a + a.conj().T)
    v = dissipator(a)
    x = random_density_matrix(basis, np.random.default_rng(8))
    out = time_dependent_trotter(Schedule.constant(u, 1.0), Schedule.constant(v, 1.0), Partition.uniform(1.0, 5), x)
    assert trace_norm(out - trotter_product(u, v, 1.0, 5, x)) < 1e-13
    with pytest.raises(ValueError, match="horizon"):
        time_dependent_trotter(Schedule.constant(u, 0.5), Schedule.constant(v, 1.0), Partition.uniform(1.0, 5), x)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(0.05, 0.5), min_size=1, max_size=6), seeds)
def test_partition_invariance_for_commuting_schedules(steps, seed):
    basis = FockBasis((3, 3))
    u = Schedule(((lambda t: np.cos(t), commutator_generator(number_operator(basis, 0))),), 4.0)
    v = Schedule(((lambda t: 1 + np.sin(t), commutator_generator(number_operator(basis, 1))),), 4.0)
    x = random_density_matrix(basis, np.random.default_rng(seed))
    partition = Partition.from_steps(steps)
    one = Partition((0.0, partition.end))
    a = time_dependent_trotter(u, v, partition, x)
    b = time_dependent_trotter(u, v, one, x)
    assert trace_norm(a - b) < 1e-9


def _two_level_projector(dim=6):
    p = np.zeros((dim, dim), dtype=complex)
    p[0, 0] = p[1, 1] = 1
    return projector_superop(p)


def test_compressed_oracle_matches_flattened_route():
    rng = np.random.default_rng(9)
    gen = gksl(random_hermitian(rng, 6), [random_matrix(rng, 6, 0.3)])
    proj = _two_level_projector()
    x = random_density_matrix(FockBasis.single(6), rng)
    pm = proj.matrix()
    full = expm(pm @ flatten(gen).matrix @ pm, 0.7) @ pm @ vec(x)
    assert np.allclose(compressed_generator_propagator(proj, gen, 0.7)(x), unvec(full), atol=1e-12)


def test_zeno_product_converges_first_order():
    basis = FockBasis.single(6)
    a = annihilation(basis)
    gen = commutator_generator(a + a.conj().T)
    proj = _two_level_projector()
    x = proj(random_density_matrix(basis, np.random.default_rng(10)))
    oracle = compressed_generator_propagator(proj, gen, 1.0)(x)
    e = [trace_norm(zeno_product(proj, gen, 1.0, n, x) - oracle) for n in (32, 64)]
    assert np.log2(e[0] / e[1]) == pytest.approx(1, abs=0.1)


@pytest.mark.parametrize("make", [random_complement_unitary, conjugation_mixer])
def test_uniform_power_ratio_is_one(make):
    proj = _two_level_projector(5)
    spec = make_uniform_power_contraction(proj, 0.4, make(proj, np.random.default_rng(11)))
    ratios = spec.verify(12, slack=1e-9)
    assert np.allclose(ratios, 1, atol=1e-9)


def test_conjugation_mixer_measurement_is_cp_trace_nonincreasing():
    proj = _two_level_projector(4)
    spec = make_uniform_power_contraction(proj, 0.5, conjugation_mixer(proj, np.random.default_rng(12)))
    m = np.asarray(spec.measurement).reshape(4, 4, 4, 4, order="F")
    choi = m.transpose(0, 2, 1, 3).reshape(16, 16)
    assert np.linalg.eigvalsh((choi + choi.conj().T) / 2).min() > -1e-12
    rho = random_density_matrix(FockBasis.single(4), np.random.default_rng(13))
    assert np.trace(unvec(np.asarray(spec.measurement) @ vec(rho))).real <= 1 + 1e-12


def test_contraction_validation():
    proj = _two_level_projector(3)
    with pytest.raises(ValueError):
        make_uniform_power_contraction(proj, 1.0)
    leaky = np.eye(9, dtype=complex)
    leaky[0, 8] = 1.0
    with pytest.raises(ValueError, match="leaks"):
        make_uniform_power_contraction(proj, 0.5, leaky)
    with pytest.raises(ValueError):
        ZenoSpec(np.eye(9), proj, 0.0)


def test_general_zeno_with_projection_matches_projective_product():
    basis = FockBasis.single(6)
    a = annihilation(basis)
    gen = commutator_generator(a + a.conj().T)
    proj = _two_level_projector()
    x = proj(random_density_matrix(basis, np.random.default_rng(14)))
    spec = ZenoSpec(proj, proj)
    out = zeno_product_general(spec, Schedule.constant(gen, 1.0), Partition.uniform(1.0, 8), x)
    assert np.allclose(out, zeno_product(proj, gen, 1.0, 8, x), atol=1e-13)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 12), seeds)
def test_telescopic_inequality_property(n, seed):
    rng = np.random.default_rng(seed)
    dim = 4
    a = gksl(random_hermitian(rng, dim), [random_matrix(rng, dim, 0.5)])
    b = gksl(random_hermitian(rng, dim), [random_matrix(rng, dim, 0.5)])
    x = random_density_matrix(FockBasis.single(dim), rng)
    step = scheme_step_map(SplittingScheme.trotter(), a, b)
    report = telescopic_defect(step, semigroup_step_map(a + b), Partition.uniform(1.0, n), x)
    assert report.contractive and report.holds
    direct = trotter_product(a, b, 1.0, n, x) - semigroup_step(a + b, 1.0, x)
    assert report.product_error == pytest.approx(trace_norm(direct), abs=1e-12)


def test_step_map_composition():
    rng = np.random.default_rng(15)
    a = commutator_generator(random_hermitian(rng, 3))
    b = commutator_generator(random_hermitian(rng, 3))
    x = random_matrix(rng, 3)
    composed = trotter_step_map(semigroup_step_map(a), semigroup_step_map(b))
    assert np.allclose(composed(0.4, 0.1, x), SplittingScheme.trotter().step(a, b, 0.3, x))
    proj = projector_superop(np.diag([1, 0, 0]).astype(complex))
    z = zeno_step_map(proj, semigroup_step_map(a))
    assert np.allclose(z(0.4, 0.1, x), proj(semigroup_step(a, 0.3, x)))
