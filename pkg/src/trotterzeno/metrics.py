"""Norms, convergence-order fits and diagnostic inequalities.

All norms act on dense ``D x D`` operators.  Sobolev norms use the diagonal
weight ``W = prod_j (1 + N_j)^{k_j / 4}`` applied on both sides, so that
``||x||_{W^{k,1}} = ||W x W||_1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .exceptions import DenseLimitError, FitError
from .fock import FockBasis
from .liouville import DENSE_LIMIT, Liouvillian, ProjectorSuperop, matrix_units, unvec, vec
from .propagators import DEFAULT_TOL, Schedule, evolution_matrix


def _finite(x: np.ndarray, name: str = "input") -> np.ndarray:
    x = np.asarray(x)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def trace_norm(x: np.ndarray, hermitian_tol: float = 1e-10) -> float:
    """Schatten 1-norm ``tr |x|``.

    Hermitian inputs (within ``hermitian_tol``) use eigenvalues; anything else
    uses singular values.
    """
    x = _finite(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"trace_norm expects a square matrix, got shape {x.shape}")
    scale = max(1.0, float(np.max(np.abs(x), initial=0.0)))
    if np.max(np.abs(x - x.conj().T), initial=0.0) <= hermitian_tol * scale:
        return float(np.sum(np.abs(np.linalg.eigvalsh((x + x.conj().T) / 2))))
    return float(np.sum(scipy.linalg.svdvals(x)))


def hs_norm(x: np.ndarray) -> float:
    """Hilbert-Schmidt norm, i.e. the 2-norm of the flattened operator."""
    return float(np.linalg.norm(_finite(x)))


@dataclass(frozen=True, eq=False)
class SobolevWeight:
    """Diagonal weight ``prod_j (1 + N_j)^{k_j / 4}`` on a Fock basis."""

    basis: FockBasis
    k: tuple[float, ...]

    def __post_init__(self):
        k = tuple(float(v) for v in np.atleast_1d(self.k))
        if len(k) == 1 and self.basis.modes > 1:
            k = k * self.basis.modes
        if len(k) != self.basis.modes:
            raise ValueError(f"need one exponent per mode ({self.basis.modes}), got {len(k)}")
        if any(v < 0 for v in k):
            raise ValueError("Sobolev exponents must be non-negative")
        object.__setattr__(self, "k", k)

    def diagonal(self) -> np.ndarray:
        """Weight entries, shape ``(D,)``."""
        out = np.ones(self.basis.total_dim)
        for mode, kj in enumerate(self.k):
            out *= (1.0 + self.basis.occupations(mode)) ** (kj / 4)
        return out

    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal()).astype(complex)

    def weigh(self, x: np.ndarray) -> np.ndarray:
        w = self.diagonal()
        return w[:, None] * np.asarray(x) * w[None, :]


def sobolev_norm(x: np.ndarray, weight: SobolevWeight) -> float:
    x = np.asarray(x)
    if x.shape != (weight.basis.total_dim,) * 2:
        raise ValueError(f"operator of shape {x.shape} does not live on basis {weight.basis.cutoffs}")
    return trace_norm(weight.weigh(x))


@dataclass(frozen=True)
class NormBounds:
    lower: float
    upper: float


def flattened_operator_norm(
    matrix: np.ndarray,
    norm: str = "2",
    *,
    restarts: int = 8,
    iterations: int = 200,
    rng: np.random.Generator | None = None,
    dense_limit: int = DENSE_LIMIT,
):
    """Induced norm of a flattened superoperator.

    ``norm="2"`` returns the largest singular value (the Hilbert-Schmidt
    induced norm).  ``norm="1"`` returns :class:`NormBounds` for the
    trace-norm induced norm: a lower bound from ascent over unit-trace-norm
    Hermitian inputs and the upper bound ``sqrt(D) * ||M||_2``.
    """
    m = _finite(np.asarray(matrix), "superoperator")
    dim = int(round(np.sqrt(m.shape[0])))
    if m.shape != (dim * dim, dim * dim):
        raise ValueError(f"superoperator shape {m.shape} is not (D^2, D^2)")
    if dim > dense_limit:
        raise DenseLimitError(f"dimension {dim} exceeds the dense limit {dense_limit}")
    two = float(scipy.linalg.svdvals(m)[0]) if m.size else 0.0
    if norm == "2":
        return two
    if norm != "1":
        raise ValueError(f"norm must be '1' or '2', got {norm!r}")
    rng = np.random.default_rng(0) if rng is None else rng

    def value(x):
        return trace_norm(unvec(m @ vec(x), dim), hermitian_tol=0.0)

    # Extreme points of the unit trace-norm ball of Hermitian matrices are
    # +-|psi><psi|.  Each sweep picks the dual certificate Z = U V^dag of
    # the current output and moves psi to the top eigenvector of the
    # Hermitian part of M^dag(Z); the objective never decreases.
    best = 0.0
    for i in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[i, i] = 1.0
        best = max(best, value(e))
    for _ in range(restarts):
        psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        psi /= np.linalg.norm(psi)
        current = value(np.outer(psi, psi.conj()))
        for _ in range(iterations):
            u, _, vh = np.linalg.svd(unvec(m @ vec(np.outer(psi, psi.conj())), dim))
            g = unvec(m.conj().T @ vec(u @ vh), dim)
            w, v = np.linalg.eigh((g + g.conj().T) / 2)
            cand = v[:, int(np.argmax(np.abs(w)))]
            val = value(np.outer(cand, cand.conj()))
            if val <= current + 1e-14:
                break
            psi, current = cand, val
        best = max(best, current)
    return NormBounds(lower=best, upper=np.sqrt(dim) * two)


@dataclass
class ConvergenceReport:
    """Log-log fit of error against step count (or max step size).

    ``n_values``/``errors`` hold every run; the fit uses only the ``used``
    mask.  Exact zeros and errors below ``100 * oracle_tol`` are excluded.
    """

    n_values: np.ndarray
    errors: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    oracle_tol: float
    used: np.ndarray
    saturated: np.ndarray
    exact: np.ndarray
    abscissa: str = "n"
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "abscissa": self.abscissa,
            "n_values": [float(v) for v in self.n_values],
            "errors": [float(v) for v in self.errors],
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "oracle_tol": self.oracle_tol,
            "used": [bool(v) for v in self.used],
            "saturated": [bool(v) for v in self.saturated],
            "exact": [bool(v) for v in self.exact],
        }


def fit_order(
    n_values: Sequence[float],
    errors: Sequence[float],
    oracle_tol: float = 0.0,
    abscissa: str = "n",
) -> ConvergenceReport:
    """Least-squares fit of ``ln(error) = slope * ln(n) + intercept``.

    Raises
    ------
    FitError
        If fewer than three points survive the saturation filter.
    """
    n = np.asarray(n_values, dtype=float)
    e = np.asarray(errors, dtype=float)
    if n.shape != e.shape or n.ndim != 1:
        raise ValueError("n_values and errors must be 1-d of equal length")
    if np.any(n <= 0) or not np.all(np.isfinite(e)) or np.any(e < 0):
        raise ValueError("n_values must be positive and errors finite and non-negative")
    exact = e == 0.0
    saturated = ~exact & (e < 100.0 * oracle_tol)
    used = ~exact & ~saturated
    if used.sum() < 3:
        raise FitError(
            f"only {int(used.sum())} usable points ({int(exact.sum())} exact, {int(saturated.sum())} "
            f"below 100x oracle tolerance {oracle_tol:g}); need at least 3"
        )
    x, y = np.log(n[used]), np.log(e[used])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return ConvergenceReport(n, e, float(slope), float(intercept), r2, float(oracle_tol), used, saturated, exact, abscissa)


def relative_bound_diagnostic(
    gen: Liouvillian,
    weight: SobolevWeight,
    samples: int = 32,
    *,
    levels: int | None = None,
    rng: np.random.Generator | None = None,
) -> dict:
    """Sampled lower estimate of ``b`` in ``||L(x)||_1 <= b ||x||_{W^{k,1}}``.

    Evaluates random Gaussian Hermitian inputs and every Hermitian matrix
    unit on the lowest ``levels`` levels (all levels by default).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    dim = gen.dim
    levels = dim if levels is None else min(levels, dim)

    def ratio(x):
        denom = sobolev_norm(x, weight)
        return trace_norm(gen(x)) / denom if denom > 0 else 0.0

    best = 0.0
    for x in matrix_units(dim, range(levels)):
        best = max(best, ratio(x))
    for _ in range(samples):
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        best = max(best, ratio(g + g.conj().T))
    return {
        "estimate": best,
        "description": f"max over {samples} Gaussian Hermitian samples and Hermitian matrix units on {levels} levels",
    }


@dataclass
class MomentStabilityReport:
    """Margins of ``tr[W L(x)] - omega tr[W x]`` or of the drift form."""

    margins: np.ndarray
    omega: float | None = None
    rate: float | None = None
    constant: float | None = None
    admissible_levels: int = 0

    @property
    def max_margin(self) -> float:
        return float(np.max(self.margins)) if self.margins.size else -np.inf


def _admissible_levels(gen: Liouvillian, levels: int | None) -> int:
    admissible = gen.dim - gen.leakage_margin()
    if levels is None:
        return admissible
    if levels > admissible:
        raise ValueError(
            f"states on {levels} levels exceed the degree margin ({admissible} admissible levels)"
        )
    return levels


def _check_support(states: Iterable[np.ndarray], levels: int, tol: float = 1e-10) -> list[np.ndarray]:
    out = []
    for x in states:
        x = np.asarray(x)
        if np.max(np.abs(x[levels:, :]), initial=0.0) > tol or np.max(np.abs(x[:, levels:]), initial=0.0) > tol:
            raise ValueError(f"state support exceeds the {levels} admissible levels")
        w = np.linalg.eigvalsh((x + x.conj().T) / 2)
        if w.min() < -tol * max(1.0, abs(w).max()):
            raise ValueError(f"state is not positive semi-definite (min eigenvalue {w.min():.2e})")
        out.append(x)
    return out


def moment_stability_check(
    gen: Liouvillian,
    weight: SobolevWeight,
    states: Sequence[np.ndarray],
    omega: float | None = None,
) -> MomentStabilityReport:
    """Margins ``tr[W^2 L(x)] - omega tr[W^2 x]`` for PSD states.

    ``W^2 = prod (1 + N_j)^{k_j / 2}`` is the weight pairing used by the
    trace-norm Sobolev norm on positive inputs.  With ``omega=None`` the
    smallest valid ``omega`` over the given states is fitted.
    """
    levels = _admissible_levels(gen, None)
    states = _check_support(states, levels)
    w2 = weight.diagonal() ** 2
    gains = np.array([np.real(np.sum(w2 * np.diag(gen(x)))) for x in states])
    moments = np.array([np.real(np.sum(w2 * np.diag(x))) for x in states])
    if omega is None:
        omega = float(np.max(gains / moments)) if states else 0.0
    return MomentStabilityReport(gains - omega * moments, omega=omega, admissible_levels=levels)


def drift_inequality_check(
    gen: Liouvillian,
    k: float,
    rate: float,
    power: float,
    states: Sequence[np.ndarray],
    levels: int | None = None,
    constant: float | None = None,
) -> MomentStabilityReport:
    """Check ``tr[L(x) (N+1)^{k/2}] <= -rate tr[x (N+1)^{power}] + c tr[x]``.

    Single-mode.  The constant ``c`` is fitted (unless supplied) as the largest
    eigenvalue of ``L^dag((N+1)^{k/2}) + rate (N+1)^{power}`` restricted to
    the admissible levels, which makes the inequality hold for every PSD
    state supported there.  Margins are returned per state.
    """
    levels = _admissible_levels(gen, levels)
    states = _check_support(states, levels)
    n1 = np.arange(gen.dim, dtype=float) + 1.0
    moment = np.diag(n1 ** (k / 2)).astype(complex)
    growth = gen.adjoint(moment) + rate * np.diag(n1**power)
    if constant is None:
        block = growth[:levels, :levels]
        constant = float(np.max(np.linalg.eigvalsh((block + block.conj().T) / 2)))
    margins = []
    for x in states:
        lhs = np.real(np.trace(gen(x) @ moment))
        rhs = -rate * np.real(np.sum(n1**power * np.diag(x))) + constant * np.real(np.trace(x))
        margins.append(lhs - rhs)
    return MomentStabilityReport(np.array(margins), rate=rate, constant=constant, admissible_levels=levels)


@dataclass
class ZenoConditionReport:
    b: float
    pairs: list  # (t, s, ||P V (1-P)||, ||(1-P) V P||)


def zeno_condition_check(
    projector: ProjectorSuperop,
    schedule: Schedule,
    times: Sequence[float],
    *,
    tol: float = DEFAULT_TOL,
    dense_limit: int = DENSE_LIMIT,
) -> ZenoConditionReport:
    """Estimate ``b`` in ``||P V(t,s) (1-P)||, ||(1-P) V(t,s) P|| <= (t-s) b``.

    Norms are flattened 2->2 norms, evaluated in the orthonormal bases of
    range(P) and its complement.  Pairs with ``t == s`` are skipped.
    """
    times = sorted(float(t) for t in times)
    if len(times) < 2:
        raise ValueError("need at least two distinct times")
    basis = projector.range_basis()
    pairs = []
    b = 0.0
    for i, t in enumerate(times):
        for s_ in times[:i]:
            if t - s_ <= 0:
                continue
            v = evolution_matrix(schedule, t, s_, tol=tol, dense_limit=dense_limit)
            # ||B^dag V (1 - B B^dag)|| and ||(1 - B B^dag) V B|| equal the
            # norms of the blocks in an orthonormal completion of B
            row = basis.conj().T @ v
            col = v @ basis
            upper = float(scipy.linalg.svdvals(row - (row @ basis) @ basis.conj().T)[0])
            lower = float(scipy.linalg.svdvals(col - basis @ (basis.conj().T @ col))[0])
            pairs.append((t, s_, upper, lower))
            b = max(b, upper / (t - s_), lower / (t - s_))
    if not pairs:
        raise ValueError("degenerate time grid")
    return ZenoConditionReport(b, pairs)


@dataclass(frozen=True)
class DriftDiagnostics:
    trace_drift: float
    min_eig: float
    top_level_mass: tuple[float, ...]
    reference_trace: float = 1.0


def drift_diagnostics(x: np.ndarray, basis: FockBasis | None = None, reference_trace: float = 1.0) -> DriftDiagnostics:
    """Trace drift ``|tr x - reference_trace|``, smallest eigenvalue and top-2-level mass per mode."""
    x = _finite(x)
    dim = x.shape[0]
    basis = FockBasis.single(dim) if basis is None else basis
    herm = (x + x.conj().T) / 2
    diag = np.real(np.diag(x))
    masses = []
    for mode, d in enumerate(basis.cutoffs):
        occ = basis.occupations(mode)
        masses.append(float(np.sum(diag[occ >= d - 2])))
    return DriftDiagnostics(
        trace_drift=float(abs(np.trace(x).real - reference_trace)),
        min_eig=float(np.linalg.eigvalsh(herm)[0]),
        top_level_mass=tuple(masses),
        reference_trace=float(reference_trace),
    )
