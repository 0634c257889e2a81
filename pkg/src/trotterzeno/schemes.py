"""Product formulas: Trotter, Strang, Suzuki, time-dependent and Zeno products.

Products are written as in the literature, ``F_n ... F_2 F_1 x``, with the
rightmost factor applied first.  A scheme ``[(A, p_1), (B, p_2), ...]``
therefore means the step map ``e^{h p_1 A} e^{h p_2 B} ...`` and its last
stage acts on the state first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .liouville import Liouvillian, ProjectorSuperop, SuperOperatorMatrix, unvec, vec
from .metrics import flattened_operator_norm, trace_norm
from .propagators import (
    DEFAULT_TOL,
    PropagatorCache,
    Schedule,
    expm,
    propagator,
    reference_evolution,
)

# A step map sends (t, s, x) to the image of x over the interval [s, t].
StepMap = Callable[[float, float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SplittingScheme:
    """Stages ``(tag, coefficient)`` with tags ``"A"`` or ``"B"``.

    ``order`` is the claimed convergence order of the product ``F(t/n)^n``.
    Schemes with a negative coefficient need backward steps and are only
    usable with reversible (pure commutator) generators.
    """

    stages: tuple[tuple[str, float], ...]
    order: int
    name: str = "custom"

    def __post_init__(self):
        stages = tuple((str(tag), float(p)) for tag, p in self.stages)
        if not stages:
            raise ValueError("a splitting scheme needs at least one stage")
        for tag, _ in stages:
            if tag not in ("A", "B"):
                raise ValueError(f"stage tag must be 'A' or 'B', got {tag!r}")
        for tag in ("A", "B"):
            total = sum(p for t, p in stages if t == tag)
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"coefficients of the {tag} stages sum to {total!r}, not 1")
        object.__setattr__(self, "stages", stages)

    @property
    def reversible_only(self) -> bool:
        return any(p < 0 for _, p in self.stages)

    @classmethod
    def trotter(cls) -> "SplittingScheme":
        return cls((("A", 1.0), ("B", 1.0)), 1, "trotter")

    @classmethod
    def strang(cls) -> "SplittingScheme":
        return cls((("B", 0.5), ("A", 1.0), ("B", 0.5)), 2, "strang")

    @classmethod
    def suzuki(cls, order: int) -> "SplittingScheme":
        """Suzuki's fractal recursion built on the Strang step.

        ``S_{2k}(h) = S_{2k-2}(p h)^2 S_{2k-2}((1 - 4p) h) S_{2k-2}(p h)^2``
        with ``p = 1 / (4 - 4^{1/(2k-1)})``.  Neighbouring stages with the
        same tag are merged.
        """
        if order < 2 or order % 2:
            raise ValueError(f"Suzuki order must be an even integer >= 2, got {order}")
        stages = list(cls.strang().stages)
        for k in range(2, order // 2 + 1):
            p = 1.0 / (4.0 - 4.0 ** (1.0 / (2 * k - 1)))
            outer = [(t, c * p) for t, c in stages]
            middle = [(t, c * (1 - 4 * p)) for t, c in stages]
            stages = outer * 2 + middle + outer * 2
        merged: list[tuple[str, float]] = []
        for tag, c in stages:
            if merged and merged[-1][0] == tag:
                merged[-1] = (tag, merged[-1][1] + c)
            else:
                merged.append((tag, c))
        # the merged sums drift by ulps; renormalize so the consistency check is exact
        for tag in ("A", "B"):
            total = sum(c for t, c in merged if t == tag)
            merged = [(t, c / total if t == tag else c) for t, c in merged]
        return cls(tuple(merged), order, f"suzuki{order}")

    @classmethod
    def from_name(cls, name: str) -> "SplittingScheme":
        name = name.lower()
        if name == "trotter":
            return cls.trotter()
        if name == "strang":
            return cls.strang()
        if name.startswith("suzuki"):
            return cls.suzuki(int(name[len("suzuki"):] or 4))
        raise ValueError(f"unknown scheme {name!r} (expected trotter, strang or suzukiN)")

    def step(
        self,
        a: Liouvillian,
        b: Liouvillian,
        h: float,
        x: np.ndarray,
        cache: PropagatorCache | None = None,
    ) -> np.ndarray:
        """One step ``F(h) x``."""
        if self.reversible_only and not (a.is_commutator and b.is_commutator):
            raise ValueError(
                f"scheme {self.name!r} has negative coefficients and needs pure commutator generators"
            )
        gens = {"A": a, "B": b}
        y = np.array(x, dtype=complex)
        for tag, p in reversed(self.stages):
            y = propagator(gens[tag], h * p, cache=cache)(y)
        return y


@dataclass(frozen=True)
class Partition:
    """Strictly increasing time points ``s_0 < s_1 < ... < s_n``."""

    points: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if len(pts) < 2:
            raise ValueError("a partition needs at least two points (n >= 1)")
        if not all(np.isfinite(pts)) or any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("partition points must be finite and strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, t: float, n: int, start: float = 0.0) -> "Partition":
        if n < 1:
            raise ValueError("n must be >= 1")
        if not t > 0:
            raise ValueError("t must be positive")
        return cls(tuple(start + t * np.arange(n + 1) / n))

    @classmethod
    def from_steps(cls, steps: Sequence[float], start: float = 0.0) -> "Partition":
        return cls(tuple(start + np.concatenate([[0.0], np.cumsum(steps)])))

    @property
    def n(self) -> int:
        return len(self.points) - 1

    @property
    def start(self) -> float:
        return self.points[0]

    @property
    def end(self) -> float:
        return self.points[-1]

    @property
    def max_step(self) -> float:
        return float(np.max(np.diff(self.points)))

    def intervals(self):
        """Pairs ``(s_{j-1}, s_j)`` in application order."""
        return list(zip(self.points[:-1], self.points[1:]))


def suzuki_product(
    scheme: SplittingScheme,
    a: Liouvillian,
    b: Liouvillian,
    t: float,
    n: int,
    x: np.ndarray,
    cache: PropagatorCache | None = None,
) -> np.ndarray:
    """``F(t/n)^n x`` for the step map of ``scheme``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if t < 0:
        raise ValueError("t must be non-negative")
    cache = PropagatorCache() if cache is None else cache
    y = np.array(x, dtype=complex)
    for _ in range(n):
        y = scheme.step(a, b, t / n, y, cache)
    return y


def trotter_product(a, b, t, n, x, cache=None):
    """``(e^{(t/n)A} e^{(t/n)B})^n x``; B acts first within each step."""
    return suzuki_product(SplittingScheme.trotter(), a, b, t, n, x, cache)


def strang_product(a, b, t, n, x, cache=None):
    """``(e^{(t/2n)B} e^{(t/n)A} e^{(t/2n)B})^n x``."""
    return suzuki_product(SplittingScheme.strang(), a, b, t, n, x, cache)


def schedule_step_map(
    schedule: Schedule,
    *,
    tol: float = DEFAULT_TOL,
    cache: PropagatorCache | None = None,
) -> StepMap:
    """Evolution-system step ``V(t, s)`` of a schedule.

    Autonomous schedules use exact propagators; others are integrated.
    """
    if schedule.autonomous:
        gen = schedule.at(0.0)

        def step(t, s, x):
            return propagator(gen, t - s, cache=cache)(x)

    else:

        def step(t, s, x):
            return reference_evolution(schedule, s, t, x, tol)

    return step


def _check_horizon(partition: Partition, *schedules: Schedule) -> None:
    for sched in schedules:
        if partition.start < -1e-12 or partition.end > sched.horizon * (1 + 1e-12) + 1e-12:
            raise ValueError(
                f"partition [{partition.start}, {partition.end}] leaves the schedule horizon [0, {sched.horizon}]"
            )


def time_dependent_trotter(
    u: Schedule,
    v: Schedule,
    partition: Partition,
    x: np.ndarray,
    *,
    tol: float = DEFAULT_TOL,
    cache: PropagatorCache | None = None,
) -> np.ndarray:
    """``prod_j U(s_j, s_{j-1}) V(s_j, s_{j-1}) x``, V acting first on each interval."""
    _check_horizon(partition, u, v)
    cache = PropagatorCache() if cache is None else cache
    ustep = schedule_step_map(u, tol=tol, cache=cache)
    vstep = schedule_step_map(v, tol=tol, cache=cache)
    y = np.array(x, dtype=complex)
    for s, t in partition.intervals():
        y = ustep(t, s, vstep(t, s, y))
    return y


def zeno_product(
    projector: ProjectorSuperop,
    gen: Liouvillian,
    t: float,
    n: int,
    x: np.ndarray,
    cache: PropagatorCache | None = None,
) -> np.ndarray:
    """``(P e^{(t/n)L} P)^n P x``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    step = propagator(gen, t / n, cache=cache)
    y = projector(x)
    for _ in range(n):
        y = projector(step(y))
    return y


def compressed_generator_propagator(projector: ProjectorSuperop, gen: Liouvillian, t: float) -> Callable:
    """The map ``x -> e^{t PLP} P x``.

    ``PLP`` vanishes off range(P), so its exponential is computed on an
    orthonormal basis of the (small) range of ``x -> P x P`` only.
    """
    basis = projector.range_basis()
    dim = projector.dim
    # coordinates of PLP restricted to range(P)
    images = np.column_stack([vec(projector(gen(unvec(basis[:, i], dim)))) for i in range(basis.shape[1])])
    reduced = expm(basis.conj().T @ images, t)

    def apply(x: np.ndarray) -> np.ndarray:
        coords = basis.conj().T @ vec(projector(x))
        return unvec(basis @ (reduced @ coords), dim)

    return apply


@dataclass(frozen=True, eq=False)
class ZenoSpec:
    """Measurement ``M`` with ``||M^n - P|| <= delta^n`` for a projection ``P``.

    ``measurement`` is either the projector-superop itself (``delta = 0``) or
    a flattened :class:`SuperOperatorMatrix`.
    """

    measurement: object
    target_projection: ProjectorSuperop
    delta: float = 0.0

    def __post_init__(self):
        if self.measurement is self.target_projection:
            return
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1) for a measurement other than P itself")

    @property
    def projective(self) -> bool:
        return self.measurement is self.target_projection

    def power_defects(self, n_check: int) -> np.ndarray:
        """``||M^n - P||_{2->2}`` for ``n = 1 .. n_check`` (flattened norms)."""
        if self.projective:
            return np.zeros(n_check)
        m = np.asarray(self.measurement)
        p = self.target_projection.matrix()
        out = []
        power = np.eye(m.shape[0], dtype=complex)
        for _ in range(n_check):
            power = m @ power
            out.append(flattened_operator_norm(power - p, "2"))
        return np.array(out)

    def verify(self, n_check: int = 10, slack: float = 1e-10) -> np.ndarray:
        """Check ``||M^n - P|| <= delta^n (1 + slack)`` and return the ratios."""
        defects = self.power_defects(n_check)
        if self.projective:
            return defects
        ratios = defects / self.delta ** np.arange(1, n_check + 1)
        if np.any(ratios > 1 + slack):
            bad = int(np.argmax(ratios > 1 + slack)) + 1
            raise ValueError(f"||M^{bad} - P|| exceeds delta^{bad} (ratio {ratios[bad - 1]:.12g})")
        return ratios

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.measurement(x)


def _complement_basis(projector: ProjectorSuperop) -> np.ndarray:
    basis = projector.range_basis()
    d2 = basis.shape[0]
    u, s, _ = np.linalg.svd(np.eye(d2, dtype=complex) - basis @ basis.conj().T)
    return u[:, s > 0.5]


def random_complement_unitary(projector: ProjectorSuperop, rng: np.random.Generator) -> SuperOperatorMatrix:
    """Flattened map acting as a Haar-random unitary on the complement of range(P).

    Range(P) is left fixed.  Requires an orthogonal projection so that the
    complement is the orthogonal complement in Hilbert-Schmidt inner product.
    """
    if not projector.orthogonal:
        raise ValueError("random complement unitaries need an orthogonal projection")
    basis = projector.range_basis()
    comp = _complement_basis(projector)
    k = comp.shape[1]
    z = (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return SuperOperatorMatrix(comp @ q @ comp.conj().T + basis @ basis.conj().T)


def conjugation_mixer(projector: ProjectorSuperop, rng: np.random.Generator) -> SuperOperatorMatrix:
    """``x -> U x U^dag`` with ``U = P + (1-P) V (1-P)`` for a random unitary ``V`` on ker(P).

    This map commutes with ``x -> P x P`` and is completely positive.
    """
    if not projector.orthogonal:
        raise ValueError("conjugation mixers need an orthogonal projection")
    p = projector.projector
    dim = projector.dim
    w, vecs = np.linalg.eigh(np.eye(dim) - p)
    kern = vecs[:, w > 0.5]
    k = kern.shape[1]
    z = (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    u = p + kern @ q @ kern.conj().T
    return SuperOperatorMatrix(np.kron(u.conj(), u))


def make_uniform_power_contraction(
    projector: ProjectorSuperop,
    delta: float,
    mixer: SuperOperatorMatrix | np.ndarray | None = None,
    leak_tol: float = 1e-12,
) -> ZenoSpec:
    """``M = P + delta (1-P) W (1-P)`` so that ``M^n - P = delta^n ((1-P) W (1-P))^n``.

    Raises
    ------
    ValueError
        If ``W`` leaks between range(P) and its complement beyond ``leak_tol``.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    p = projector.matrix()
    d2 = p.shape[0]
    q = np.eye(d2, dtype=complex) - p
    w = np.eye(d2, dtype=complex) if mixer is None else np.asarray(mixer)
    leak = max(np.max(np.abs(p @ w @ q), initial=0.0), np.max(np.abs(q @ w @ p), initial=0.0))
    if leak > leak_tol:
        raise ValueError(f"mixer leaks between range(P) and its complement ({leak:.2e} > {leak_tol:.0e})")
    m = p + delta * (q @ w @ q)
    return ZenoSpec(SuperOperatorMatrix(m), projector, float(delta))


def zeno_product_general(
    spec: ZenoSpec,
    schedule: Schedule,
    partition: Partition,
    x: np.ndarray,
    *,
    tol: float = DEFAULT_TOL,
    cache: PropagatorCache | None = None,
) -> np.ndarray:
    """``prod_j M V(s_j, s_{j-1}) x``, the first interval acting first."""
    _check_horizon(partition, schedule)
    vstep = schedule_step_map(schedule, tol=tol, cache=PropagatorCache() if cache is None else cache)
    y = np.array(x, dtype=complex)
    for s, t in partition.intervals():
        y = spec(vstep(t, s, y))
    return y


@dataclass
class TelescopicReport:
    """Per-step defects ``||(F_j - T_j) T(s_{j-1}, s_0) x||_1`` and the product error."""

    defects: np.ndarray
    product_error: float
    contractive: bool
    max_expansion: float = 0.0
    norm: str = "trace"

    @property
    def max_defect(self) -> float:
        return float(np.max(self.defects))

    @property
    def bound(self) -> float:
        return len(self.defects) * self.max_defect

    @property
    def holds(self) -> bool:
        return self.product_error <= self.bound + 1e-12


def telescopic_defect(
    step: StepMap,
    oracle: StepMap,
    partition: Partition,
    x: np.ndarray,
    *,
    contraction_tol: float = 1e-9,
    norm: Callable[[np.ndarray], float] = trace_norm,
) -> TelescopicReport:
    """Evaluate both sides of ``||prod F_j x - T x|| <= n max_j ||(F_j - T_j) T_{j-1..0} x||``.

    Contractivity of ``F`` is checked on the states it is applied to (the
    oracle orbit and the product iterates), not as an operator norm.
    """
    y = np.array(x, dtype=complex)
    z = y.copy()
    defects = []
    expansion = 0.0
    for s, t in partition.intervals():
        fy = step(t, s, y)
        ty = oracle(t, s, y)
        defects.append(norm(fy - ty))
        fz = step(t, s, z)
        expansion = max(expansion, norm(fy) - norm(y), norm(fz) - norm(z))
        y, z = ty, fz
    return TelescopicReport(
        np.array(defects),
        norm(z - y),
        contractive=expansion <= contraction_tol,
        max_expansion=float(expansion),
    )


def scheme_step_map(
    scheme: SplittingScheme,
    a: Liouvillian,
    b: Liouvillian,
    cache: PropagatorCache | None = None,
) -> StepMap:
    cache = PropagatorCache() if cache is None else cache
    return lambda t, s, x: scheme.step(a, b, t - s, x, cache)


def semigroup_step_map(gen: Liouvillian, cache: PropagatorCache | None = None) -> StepMap:
    cache = PropagatorCache() if cache is None else cache
    return lambda t, s, x: propagator(gen, t - s, cache=cache)(x)


def trotter_step_map(u: StepMap, v: StepMap) -> StepMap:
    """``U(t, s) V(t, s)`` as a single step map."""
    return lambda t, s, x: u(t, s, v(t, s, x))


def zeno_step_map(measurement: Callable, evolution: StepMap) -> StepMap:
    return lambda t, s, x: measurement(evolution(t, s, x))
