"""Truncated multi-mode Fock spaces and elementary bosonic operators.

Operators are plain dense ``numpy`` arrays of shape ``(D, D)`` with
``D = basis.total_dim``.  Flat indices are row-major over modes, so mode 0
varies slowest and ``embed_single_mode`` is a Kronecker product in mode order.

A hard cutoff is used on every mode: the creation operator maps the top level
``d_j - 1`` to zero, which keeps ``creation`` the exact adjoint of
``annihilation``.  The price is that the canonical commutation relation only
holds below the cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
from scipy.special import gammainc

from .exceptions import TruncationError

COHERENT_GUARD = 1e-10


@dataclass(frozen=True)
class FockBasis:
    """Per-mode cutoffs of a truncated bosonic Hilbert space.

    Parameters
    ----------
    cutoffs : sequence of int
        Dimension ``d_j`` of each mode; occupations run over ``0 .. d_j - 1``.
    """

    cutoffs: tuple[int, ...]

    def __post_init__(self):
        cutoffs = tuple(int(d) for d in np.atleast_1d(self.cutoffs))
        if not cutoffs:
            raise ValueError("a Fock basis needs at least one mode")
        if any(d < 2 for d in cutoffs):
            raise ValueError(f"every cutoff must be >= 2, got {cutoffs}")
        object.__setattr__(self, "cutoffs", cutoffs)

    @classmethod
    def single(cls, cutoff: int) -> "FockBasis":
        return cls((cutoff,))

    @property
    def modes(self) -> int:
        return len(self.cutoffs)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.cutoffs))

    def flat_index(self, occupations: Sequence[int]) -> int:
        """Flat index of the basis state with the given occupation numbers."""
        if len(occupations) != self.modes:
            raise ValueError(f"expected {self.modes} occupations, got {len(occupations)}")
        return int(np.ravel_multi_index(tuple(int(n) for n in occupations), self.cutoffs))

    def multi_index(self, index: int) -> tuple[int, ...]:
        """Occupation numbers of the basis state at a flat index."""
        return tuple(int(n) for n in np.unravel_index(int(index), self.cutoffs))

    def occupations(self, mode: int) -> np.ndarray:
        """Occupation of ``mode`` for every flat index, shape ``(D,)``."""
        self._check_mode(mode)
        grids = np.indices(self.cutoffs).reshape(self.modes, -1)
        return grids[mode]

    def _check_mode(self, mode: int) -> None:
        if not 0 <= int(mode) < self.modes:
            raise IndexError(f"mode {mode} out of range for {self.modes}-mode basis")


@dataclass(frozen=True, eq=False)
class Ket:
    """State vector on a truncated Fock space.

    ``tail_mass`` is the probability weight that the untruncated state puts
    beyond the cutoff (zero for Fock states).
    """

    basis: FockBasis
    amplitudes: np.ndarray
    tail_mass: float = field(default=0.0)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.total_dim,):
            raise ValueError(
                f"amplitudes have shape {amps.shape}, basis needs ({self.basis.total_dim},)"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("ket amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def dm(self) -> np.ndarray:
        """Density matrix ``|psi><psi|``."""
        return np.outer(self.amplitudes, self.amplitudes.conj())


def single_mode_annihilation(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), 1).astype(complex)


def embed_single_mode(basis: FockBasis, mode: int, op: np.ndarray) -> np.ndarray:
    """Act with ``op`` on one mode and with the identity on all others."""
    basis._check_mode(mode)
    op = np.asarray(op, dtype=complex)
    d = basis.cutoffs[mode]
    if op.shape != (d, d):
        raise ValueError(f"operator shape {op.shape} does not match cutoff {d} of mode {mode}")
    factors = [np.eye(c, dtype=complex) for c in basis.cutoffs]
    factors[mode] = op
    return reduce(np.kron, factors)


def annihilation(basis: FockBasis, mode: int = 0) -> np.ndarray:
    basis._check_mode(mode)
    return embed_single_mode(basis, mode, single_mode_annihilation(basis.cutoffs[mode]))


def creation(basis: FockBasis, mode: int = 0) -> np.ndarray:
    return annihilation(basis, mode).conj().T


def number_operator(basis: FockBasis, mode: int = 0) -> np.ndarray:
    return np.diag(basis.occupations(mode).astype(complex))


def identity(basis: FockBasis) -> np.ndarray:
    return np.eye(basis.total_dim, dtype=complex)


def parity_operator(basis: FockBasis, mode: int | None = None) -> np.ndarray:
    """``(-1)^N`` for one mode, or for the total number if ``mode`` is None."""
    if mode is None:
        total = sum(basis.occupations(j) for j in range(basis.modes))
    else:
        total = basis.occupations(mode)
    return np.diag((-1.0) ** total).astype(complex)


def fock_state(basis: FockBasis, occupations: Sequence[int]) -> Ket:
    amps = np.zeros(basis.total_dim, dtype=complex)
    amps[basis.flat_index(occupations)] = 1.0
    return Ket(basis, amps)


def coherent_tail_mass(alpha: complex, cutoff: int) -> float:
    """Poisson weight ``P(n >= cutoff)`` of ``|alpha>`` lost to truncation."""
    return float(gammainc(cutoff, abs(alpha) ** 2)) if alpha != 0 else 0.0


def _coherent_series(alpha: complex, cutoff: int) -> np.ndarray:
    # recursion c_n = c_{n-1} alpha / sqrt(n) avoids overflowing factorials
    coeffs = np.empty(cutoff, dtype=complex)
    coeffs[0] = np.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, cutoff):
        coeffs[n] = coeffs[n - 1] * alpha / np.sqrt(n)
    return coeffs


def _per_mode(value, modes: int, name: str) -> list:
    values = list(np.atleast_1d(value))
    if len(values) != modes:
        raise ValueError(f"{name} needs one entry per mode ({modes}), got {len(values)}")
    return values


def coherent_state(basis: FockBasis, alpha, guard: float = COHERENT_GUARD) -> Ket:
    """Truncated, renormalized coherent state ``|alpha_1, ..., alpha_m>``.

    Parameters
    ----------
    basis : FockBasis
    alpha : complex or sequence of complex
        One amplitude per mode (a scalar is accepted for single-mode bases).
    guard : float
        Largest tolerated tail mass beyond the cutoff before renormalization.

    Raises
    ------
    TruncationError
        If the tail mass exceeds ``guard``.
    """
    alphas = [complex(a) for a in _per_mode(alpha, basis.modes, "alpha")]
    tails = [coherent_tail_mass(a, d) for a, d in zip(alphas, basis.cutoffs)]
    tail = float(-np.expm1(np.sum(np.log1p(-np.asarray(tails)))))
    if tail > guard:
        raise TruncationError(
            f"coherent state alpha={alphas} loses tail mass {tail:.3e} beyond cutoffs "
            f"{basis.cutoffs} (guard {guard:.1e})"
        )
    factors = []
    for a, d in zip(alphas, basis.cutoffs):
        c = _coherent_series(a, d)
        factors.append(c / np.linalg.norm(c))
    return Ket(basis, reduce(np.kron, factors), tail_mass=tail)


def cat_state(
    basis: FockBasis,
    alpha: complex,
    parity: str = "plus",
    mode: int = 0,
    guard: float = COHERENT_GUARD,
) -> Ket:
    """Normalized ``|alpha> + |-alpha>`` (plus) or ``|alpha> - |-alpha>`` (minus).

    The cat lives on ``mode``; every other mode is left in the vacuum.
    """
    basis._check_mode(mode)
    if parity not in ("plus", "minus"):
        raise ValueError(f"parity must be 'plus' or 'minus', got {parity!r}")
    alpha = complex(alpha)
    d = basis.cutoffs[mode]
    tail = coherent_tail_mass(alpha, d)
    if tail > guard:
        raise TruncationError(
            f"cat state alpha={alpha} loses tail mass {tail:.3e} beyond cutoff {d} (guard {guard:.1e})"
        )
    series = _coherent_series(alpha, d)
    keep = np.arange(d) % 2 == (0 if parity == "plus" else 1)
    vec = np.where(keep, series, 0.0)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ValueError("odd cat state is undefined for alpha = 0")
    factors = [np.eye(c, dtype=complex)[0] for c in basis.cutoffs]
    factors[mode] = vec / norm
    return Ket(basis, reduce(np.kron, factors), tail_mass=tail)


def maximally_mixed(basis: FockBasis) -> np.ndarray:
    return np.eye(basis.total_dim, dtype=complex) / basis.total_dim


def random_density_matrix(basis: FockBasis, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from a Ginibre ensemble of the given rank."""
    dim = basis.total_dim
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
