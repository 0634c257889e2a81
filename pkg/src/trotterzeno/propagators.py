"""Reference evolutions: exact semigroup steps and time-dependent solutions.

Autonomous steps ``e^{tL}`` are matrix exponentials.  For a pure commutator
generator the exponential is taken on the Hilbert space, ``U = e^{-itH}``,
and applied as ``x -> U x U^dag``; this is the same map as the flattened
exponential at a fraction of the cost.  Dissipative generators are
exponentiated in flattened form up to the dense limit and stepped with a
truncated Taylor series in action form beyond it.

Time-dependent generators are integrated with an adaptive Dormand-Prince
5(4) pair whose local error is controlled in trace norm.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .exceptions import DenseLimitError, NumericalError, StepSizeUnderflow
from .liouville import DENSE_LIMIT, Liouvillian, flatten, unvec, vec

DEFAULT_TOL = 1e-11


def expm(a: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Matrix exponential ``exp(scale * a)`` by scaling and squaring with Pade.

    Raises
    ------
    NumericalError
        On non-finite input or overflow.
    """
    a = np.asarray(a)
    if not np.all(np.isfinite(a)) or not np.isfinite(scale):
        raise NumericalError("expm: non-finite input")
    with np.errstate(over="raise", invalid="raise"):
        try:
            out = scipy.linalg.expm(scale * a)
        except FloatingPointError as exc:
            raise NumericalError(f"expm: overflow ({exc})") from exc
    if not np.all(np.isfinite(out)):
        raise NumericalError("expm: overflow")
    return out


def block_expm(a: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """``exp(scale * a)`` exponentiating each connected block separately.

    The coupling graph of the nonzero pattern is split into connected
    components; permuted into those components ``a`` is block diagonal and so
    is its exponential.  Generators that conserve a quantity (such as the
    offset ``i - j`` of matrix units) decompose into many small blocks.
    """
    a = np.asarray(a)
    pattern = (a != 0) | (a.T != 0)
    count, labels = connected_components(pattern, directed=False)
    if count == 1:
        return expm(a, scale)
    out = np.zeros_like(a, dtype=complex)
    for c in range(count):
        idx = np.flatnonzero(labels == c)
        out[np.ix_(idx, idx)] = expm(a[np.ix_(idx, idx)], scale)
    return out


@dataclass(frozen=True, eq=False)
class Propagator:
    """A fixed-time map ``x -> e^{tL} x`` in one of three representations."""

    kind: str  # "unitary", "dense" or "action"
    matrix: np.ndarray | None = None
    generator: Liouvillian | None = None
    time: float = 0.0
    tol: float = 1e-12

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if self.kind == "unitary":
            u = self.matrix
            return u @ x @ u.conj().T
        if self.kind == "dense":
            return unvec(self.matrix @ vec(x), x.shape[0])
        return taylor_action(self.generator, self.time, x, self.tol)

    def superoperator(self) -> np.ndarray:
        """Flattened matrix of the map (materialized for the unitary kind)."""
        if self.kind == "unitary":
            return np.kron(self.matrix.conj(), self.matrix)
        if self.kind == "dense":
            return self.matrix
        raise DenseLimitError("action-form propagators have no dense matrix")


class PropagatorCache:
    """Thread-safe memo of propagators keyed by generator content and step.

    A hit returns the very object computed on the first request, so cached
    and fresh results are bit-identical.
    """

    def __init__(self):
        self._store: dict = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key, compute: Callable[[], Propagator]) -> Propagator:
        with self._lock:
            if key in self._store:
                self.hits += 1
                return self._store[key]
        value = compute()
        with self._lock:
            self.misses += 1
            return self._store.setdefault(key, value)

    def __len__(self):
        return len(self._store)


def _operator_norm_bound(gen: Liouvillian) -> float:
    # ||L||_{2->2} <= 2||H|| + sum_j 2||L_j||^2
    bound = 0.0
    if gen.hamiltonian is not None:
        bound += 2 * np.linalg.norm(gen.hamiltonian, 2)
    for j in gen.jumps:
        bound += 2 * np.linalg.norm(j, 2) ** 2
    return float(bound)


def taylor_action(gen: Liouvillian, t: float, x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """``e^{tL} x`` by sub-stepped Taylor series using only the action of ``L``.

    The step is split so that each sub-step has ``|h| ||L|| <= 1``, and each
    series is truncated once the next term is below ``tol`` relative to the
    current iterate.
    """
    norm = _operator_norm_bound(gen)
    substeps = max(1, int(np.ceil(abs(t) * norm)))
    h = t / substeps
    y = np.array(x, dtype=complex)
    for _ in range(substeps):
        term = y
        acc = y.copy()
        scale = max(np.linalg.norm(y), 1e-300)
        for k in range(1, 60):
            term = gen(term) * (h / k)
            acc += term
            if np.linalg.norm(term) <= tol * scale:
                break
        else:
            raise NumericalError("taylor_action: series did not converge")
        y = acc
    return y


def propagator(
    gen: Liouvillian,
    t: float,
    *,
    cache: PropagatorCache | None = None,
    allow_negative: bool = False,
    dense_limit: int = DENSE_LIMIT,
    tol: float = 1e-12,
) -> Propagator:
    """The map ``e^{tL}`` for a fixed step ``t``.

    Raises
    ------
    ValueError
        For ``t < 0`` on a dissipative generator unless ``allow_negative``.
    """
    t = float(t)
    if t < 0 and not gen.is_commutator and not allow_negative:
        raise ValueError("negative time steps are only defined for pure commutator generators")

    def compute() -> Propagator:
        if gen.is_commutator:
            if gen.hamiltonian is None:
                return Propagator("unitary", np.eye(gen.dim, dtype=complex))
            return Propagator("unitary", expm(gen.hamiltonian, -1j * t))
        if gen.dim <= dense_limit:
            return Propagator("dense", block_expm(np.asarray(flatten(gen, dense_limit)), t))
        return Propagator("action", None, gen, t, tol)

    if cache is None:
        return compute()
    return cache.get((gen.key, repr(t), dense_limit), compute)


def semigroup_step(
    gen: Liouvillian,
    t: float,
    x: np.ndarray,
    *,
    cache: PropagatorCache | None = None,
    allow_negative: bool = False,
    dense_limit: int = DENSE_LIMIT,
) -> np.ndarray:
    """``e^{tL}(x)``."""
    if t == 0:
        return np.array(x, dtype=complex)
    return propagator(gen, t, cache=cache, allow_negative=allow_negative, dense_limit=dense_limit)(x)


class _Constant:
    """Coefficient function marker for time-independent terms."""

    def __init__(self, value: float = 1.0):
        self.value = float(value)

    def __call__(self, t: float) -> float:
        return self.value

    def __repr__(self):
        return f"Constant({self.value})"


def constant(value: float = 1.0) -> Callable[[float], float]:
    return _Constant(value)


@dataclass(frozen=True, eq=False)
class Schedule:
    """Time-dependent generator ``L_t = sum_i f_i(t) L_i`` on ``[0, horizon]``.

    Coefficients multiplying dissipative terms must stay non-negative;
    terms without jumps accept any real coefficient.
    """

    terms: tuple[tuple[Callable[[float], float], Liouvillian], ...]
    horizon: float
    dim: int = field(init=False)

    def __post_init__(self):
        terms = tuple((f, gen) for f, gen in self.terms)
        if not terms:
            raise ValueError("a schedule needs at least one term (use Liouvillian.zero)")
        dims = {gen.dim for _, gen in terms}
        if len(dims) != 1:
            raise ValueError(f"schedule terms act on different dimensions {sorted(dims)}")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "dim", dims.pop())

    @classmethod
    def constant(cls, gen: Liouvillian, horizon: float) -> "Schedule":
        return cls(((constant(1.0), gen),), horizon)

    @classmethod
    def zero(cls, dim: int, horizon: float) -> "Schedule":
        return cls.constant(Liouvillian.zero(dim), horizon)

    @property
    def autonomous(self) -> bool:
        return all(isinstance(f, _Constant) for f, _ in self.terms)

    def _check_time(self, t: float) -> None:
        if not -1e-12 <= t <= self.horizon * (1 + 1e-12) + 1e-12:
            raise ValueError(f"time {t} outside schedule horizon [0, {self.horizon}]")

    def coefficients(self, t: float) -> list[float]:
        self._check_time(t)
        coefs = [float(f(t)) for f, _ in self.terms]
        if not all(np.isfinite(coefs)):
            raise NumericalError(f"non-finite schedule coefficient at t={t}")
        return coefs

    def at(self, t: float) -> Liouvillian:
        gens = [gen.scaled(c) for c, (_, gen) in zip(self.coefficients(t), self.terms)]
        return sum(gens[1:], gens[0])

    def action(self, t: float, x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x, dtype=complex)
        for c, (_, gen) in zip(self.coefficients(t), self.terms):
            if c != 0.0:
                if c < 0 and gen.jumps:
                    raise ValueError(f"negative rate {c} on a dissipative term at t={t}")
                out += c * gen(x)
        return out

    def __add__(self, other: "Schedule") -> "Schedule":
        if not isinstance(other, Schedule):
            return NotImplemented
        return Schedule(self.terms + other.terms, min(self.horizon, other.horizon))

    def check_continuity(self, samples: int = 1024) -> None:
        """Sampled check that coefficients are finite and show no jumps.

        A jump shows up as a largest neighbour difference that fails to
        shrink when the grid is refined.
        """
        coarse = np.linspace(0.0, self.horizon, samples + 1)
        fine = np.linspace(0.0, self.horizon, 2 * samples + 1)
        for f, _ in self.terms:
            vc = np.array([f(t) for t in coarse], dtype=float)
            vf = np.array([f(t) for t in fine], dtype=float)
            if not (np.all(np.isfinite(vc)) and np.all(np.isfinite(vf))):
                raise ValueError(f"schedule coefficient {f!r} is not finite on [0, {self.horizon}]")
            dc = np.max(np.abs(np.diff(vc)), initial=0.0)
            df = np.max(np.abs(np.diff(vf)), initial=0.0)
            if df > 1e-8 and df > dc / 1.5:
                raise ValueError(f"schedule coefficient {f!r} looks discontinuous on [0, {self.horizon}]")


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _trace_norm(x: np.ndarray) -> float:
    return float(np.sum(scipy.linalg.svdvals(x)))


def reference_evolution(
    schedule: Schedule,
    t_start: float,
    t_end: float,
    x: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_steps: int = 1_000_000,
) -> np.ndarray:
    """Solve ``dx/dt = L_t(x)`` from ``t_start`` to ``t_end``.

    The local error estimate of each step is held below ``tol * h / span``
    in trace norm, which keeps the global error near ``tol``.

    Raises
    ------
    StepSizeUnderflow
        If the step size collapses; ``last_time`` holds the last accepted time.
    """
    if tol < 1e-13:
        raise ValueError("tol must be >= 1e-13")
    if t_end < t_start:
        raise ValueError("t_end must not precede t_start")
    schedule._check_time(t_start)
    schedule._check_time(t_end)
    y = np.array(x, dtype=complex)
    span = t_end - t_start
    if span == 0:
        return y
    f = schedule.action
    t = t_start
    k1 = f(t, y)
    scale = max(np.linalg.norm(k1), 1e-12) / max(np.linalg.norm(y), 1e-300)
    h = min(span, 0.1 * tol ** 0.2 / scale)
    steps = 0
    while t < t_end:
        if t + h >= t_end or (t_end - t - h) < 1e-12 * span:
            h = t_end - t
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
            ks.append(f(min(t + _C[i] * h, t_end), yi))
        y_new = y + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
        err = _trace_norm(h * sum(e * k for e, k in zip(_E, ks)))
        allowed = tol * h / span
        if not np.isfinite(err):
            raise NumericalError(f"reference_evolution: non-finite state at t={t}")
        if err <= allowed:
            t = t + h if t + h < t_end else t_end
            y = y_new
            k1 = ks[-1]  # first-same-as-last
        factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * (allowed / err) ** 0.2))
        h *= factor
        steps += 1
        if h < 1e-14 * max(1.0, abs(t)) and t < t_end:
            raise StepSizeUnderflow(f"step size underflow at t={t}", last_time=t)
        if steps > max_steps:
            raise StepSizeUnderflow(f"step budget exhausted at t={t}", last_time=t)
    return y


def evolution_system_step(
    schedule: Schedule,
    t: float,
    s: float,
    x: np.ndarray,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """Two-parameter evolution ``U(t, s) x`` for ``s <= t``."""
    return reference_evolution(schedule, s, t, x, tol)


def validate_reference(
    schedule: Schedule,
    t_start: float,
    t_end: float,
    x: np.ndarray,
    tol: float = DEFAULT_TOL,
) -> float:
    """Trace-norm gap between runs at ``tol`` and ``tol / 10``."""
    coarse = reference_evolution(schedule, t_start, t_end, x, tol)
    fine = reference_evolution(schedule, t_start, t_end, x, max(tol / 10, 1e-13))
    return _trace_norm(coarse - fine)


def evolution_matrix(
    schedule: Schedule,
    t: float,
    s: float,
    *,
    tol: float = DEFAULT_TOL,
    dense_limit: int = DENSE_LIMIT,
) -> np.ndarray:
    """Flattened ``V(t, s)``; exact for autonomous schedules, column-wise otherwise."""
    d = schedule.dim
    if schedule.autonomous:
        gen = schedule.at(s)
        if not gen.is_commutator and d > dense_limit:
            raise DenseLimitError(f"dimension {d} exceeds the dense limit {dense_limit}")
        return propagator(gen, t - s, dense_limit=dense_limit).superoperator()
    if d > dense_limit:
        raise DenseLimitError(f"dimension {d} exceeds the dense limit {dense_limit}")
    cols = []
    for k in range(d * d):
        e = np.zeros(d * d, dtype=complex)
        e[k] = 1.0
        cols.append(vec(reference_evolution(schedule, s, t, unvec(e, d), tol)))
    return np.column_stack(cols)


def orbit(gen: Liouvillian, times: Sequence[float], x: np.ndarray, *, cache: PropagatorCache | None = None) -> list[np.ndarray]:
    """States ``e^{t_k L} x`` on an equally spaced grid starting at 0.

    One propagator for the grid spacing is reused for every step.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return []
    if times[0] != 0.0:
        raise ValueError("orbit grids start at t = 0")
    steps = np.diff(times)
    if steps.size and not np.allclose(steps, steps[0], rtol=1e-12, atol=0):
        raise ValueError("orbit grids must be equally spaced")
    out = [np.array(x, dtype=complex)]
    if steps.size:
        prop = propagator(gen, float(steps[0]), cache=cache)
        for _ in steps:
            out.append(prop(out[-1]))
    return out
