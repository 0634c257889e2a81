"""Generators of dynamics on density operators.

A :class:`Liouvillian` stores a Hamiltonian and jump operators and acts as

    L(x) = -i[H, x] + sum_j (L_j x L_j^dag - 1/2 {L_j^dag L_j, x}).

Every generator can also be flattened into a ``D^2 x D^2`` matrix using
column stacking, ``vec(A x B) = (B^T kron A) vec(x)``.  Flattening is only
offered up to ``DENSE_LIMIT`` (Hilbert dimension); larger problems must use
the action form.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DenseLimitError

DENSE_LIMIT = 64


def vec(x: np.ndarray) -> np.ndarray:
    """Column-stacking flattening of a square matrix."""
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    return v.reshape(dim, dim, order="F")


def _as_square(op, name: str, dim: int | None = None) -> np.ndarray:
    arr = np.array(op, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def _is_hermitian(op: np.ndarray, tol: float) -> bool:
    scale = max(1.0, float(np.max(np.abs(op))) if op.size else 1.0)
    return bool(np.max(np.abs(op - op.conj().T), initial=0.0) <= tol * scale)


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """GKSL generator ``-i[H, .] + sum_j D[L_j]`` on ``dim x dim`` matrices.

    Instances are immutable.  Use :func:`commutator_generator`,
    :func:`dissipator` or :func:`gksl` rather than the constructor when
    shape checks against a basis are wanted.
    """

    dim: int
    hamiltonian: np.ndarray | None = None
    jumps: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        dim = int(self.dim)
        object.__setattr__(self, "dim", dim)
        if self.hamiltonian is not None:
            object.__setattr__(self, "hamiltonian", _as_square(self.hamiltonian, "hamiltonian", dim))
        jumps = tuple(_as_square(j, "jump operator", dim) for j in self.jumps)
        object.__setattr__(self, "jumps", jumps)
        # x -> G x + x G^dag + sum L x L^dag with G = -iH - K/2
        decay = sum((j.conj().T @ j for j in jumps), np.zeros((dim, dim), dtype=complex))
        drift = -0.5 * decay
        if self.hamiltonian is not None:
            drift = drift - 1j * self.hamiltonian
        drift.setflags(write=False)
        object.__setattr__(self, "_drift", drift)

    @classmethod
    def zero(cls, dim: int) -> "Liouvillian":
        return cls(dim)

    @property
    def is_commutator(self) -> bool:
        """True if there are no jump operators (reversible dynamics)."""
        return not self.jumps

    @property
    def key(self) -> str:
        """Content hash identifying the generator, used by propagator caches."""
        h = hashlib.sha1(str(self.dim).encode())
        if self.hamiltonian is not None:
            h.update(b"H")
            h.update(np.ascontiguousarray(self.hamiltonian).tobytes())
        for j in self.jumps:
            h.update(b"L")
            h.update(np.ascontiguousarray(j).tobytes())
        return h.hexdigest()

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        g = self._drift
        out = g @ x + x @ g.conj().T
        for j in self.jumps:
            out += j @ x @ j.conj().T
        return out

    def adjoint(self, obs: np.ndarray) -> np.ndarray:
        """Heisenberg-picture action ``L^dag(X)`` (adjoint in the trace pairing)."""
        obs = np.asarray(obs)
        g = self._drift
        out = g.conj().T @ obs + obs @ g
        for j in self.jumps:
            out += j.conj().T @ obs @ j
        return out

    def scaled(self, c: float) -> "Liouvillian":
        """Generator of ``c * L``; negative ``c`` is only allowed without jumps."""
        c = float(c)
        if self.jumps and c < 0:
            raise ValueError("a dissipative generator cannot be scaled by a negative factor")
        ham = None if self.hamiltonian is None else c * self.hamiltonian
        return Liouvillian(self.dim, ham, tuple(np.sqrt(c) * j for j in self.jumps))

    def __add__(self, other: "Liouvillian") -> "Liouvillian":
        if not isinstance(other, Liouvillian):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError(f"cannot add generators of dimension {self.dim} and {other.dim}")
        hams = [h for h in (self.hamiltonian, other.hamiltonian) if h is not None]
        ham = sum(hams[1:], hams[0]) if hams else None
        return Liouvillian(self.dim, ham, self.jumps + other.jumps)

    def __rmul__(self, c: float) -> "Liouvillian":
        return self.scaled(c)

    def leakage_margin(self) -> int:
        """Largest Fock-index offset of ``H``, ``L_j`` and ``L_j^dag L_j``.

        Matrix units supported below ``dim - margin`` are mapped exactly as
        by the untruncated generator (for single-mode generators built from
        normal-ordered polynomials).
        """
        ops = [] if self.hamiltonian is None else [self.hamiltonian]
        for j in self.jumps:
            ops += [j, j.conj().T @ j]
        margin = 0
        for op in ops:
            rows, cols = np.nonzero(np.abs(op) > 0)
            if rows.size:
                margin = max(margin, int(np.max(np.abs(rows - cols))))
        return margin


class SuperOperatorMatrix:
    """Dense ``D^2 x D^2`` matrix acting on column-stacked ``D x D`` operators."""

    def __init__(self, matrix: np.ndarray):
        matrix = np.array(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"superoperator matrix must be square, got {matrix.shape}")
        dim = int(round(np.sqrt(matrix.shape[0])))
        if dim * dim != matrix.shape[0]:
            raise ValueError(f"superoperator size {matrix.shape[0]} is not a square number")
        matrix.setflags(write=False)
        self.matrix = matrix
        self.dim = dim

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(x), self.dim)

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __matmul__(self, other: "SuperOperatorMatrix") -> "SuperOperatorMatrix":
        return SuperOperatorMatrix(self.matrix @ np.asarray(other))


class ProjectorSuperop:
    """The map ``x -> P x P`` for an idempotent ``P``.

    Parameters
    ----------
    projector : ndarray
        Hilbert-space projection with ``P @ P == P`` within ``tol``.
    """

    def __init__(self, projector: np.ndarray, tol: float = 1e-10):
        p = _as_square(projector, "projector")
        defect = float(np.max(np.abs(p @ p - p)))
        if defect > tol:
            raise ValueError(f"projector is not idempotent (|P^2 - P| = {defect:.2e})")
        self.projector = p
        self.dim = p.shape[0]
        self.orthogonal = _is_hermitian(p, tol)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        p = self.projector
        return p @ np.asarray(x) @ p

    def complement(self, x: np.ndarray) -> np.ndarray:
        """``x - P x P``."""
        return np.asarray(x) - self(x)

    def matrix(self) -> np.ndarray:
        p = self.projector
        return np.kron(p.T, p)

    def hilbert_range(self) -> np.ndarray:
        """Orthonormal basis (columns) of the range of ``P``."""
        if self.orthogonal:
            w, v = np.linalg.eigh((self.projector + self.projector.conj().T) / 2)
            return v[:, w > 0.5]
        u, s, _ = np.linalg.svd(self.projector)
        return u[:, s > 0.5]

    def range_basis(self) -> np.ndarray:
        """Orthonormal basis of the range of ``x -> P x P`` in flattened form.

        Only orthogonal projections give an orthonormal basis via matrix
        units of ``range(P)``; otherwise the flattened matrix is decomposed.
        """
        if self.orthogonal:
            v = self.hilbert_range()
            return np.kron(v.conj(), v)
        u, s, _ = np.linalg.svd(self.matrix())
        return u[:, s > 0.5]


def commutator_generator(hamiltonian: np.ndarray, check_hermitian: bool = True) -> Liouvillian:
    """Generator ``x -> -i[H, x]``."""
    h = _as_square(hamiltonian, "hamiltonian")
    if check_hermitian and not _is_hermitian(h, 1e-12):
        raise ValueError("hamiltonian is not Hermitian; pass check_hermitian=False for a general map")
    return Liouvillian(h.shape[0], h)


def dissipator(jump: np.ndarray) -> Liouvillian:
    """Generator ``x -> L x L^dag - 1/2 {L^dag L, x}``."""
    j = _as_square(jump, "jump operator")
    return Liouvillian(j.shape[0], None, (j,))


def gksl(hamiltonian: np.ndarray | None = None, jumps: Iterable[np.ndarray] = (), dim: int | None = None) -> Liouvillian:
    """Full GKSL generator from an optional Hamiltonian and jump operators."""
    jumps = tuple(jumps)
    ops = ([hamiltonian] if hamiltonian is not None else []) + list(jumps)
    if dim is None:
        if not ops:
            raise ValueError("dim is required when neither a Hamiltonian nor jumps are given")
        dim = np.asarray(ops[0]).shape[0]
    for op in ops:
        _as_square(op, "operator", dim)
    if hamiltonian is not None and not _is_hermitian(np.asarray(hamiltonian, dtype=complex), 1e-12):
        raise ValueError("hamiltonian is not Hermitian")
    return Liouvillian(dim, hamiltonian, jumps)


def flatten(gen: Liouvillian, dense_limit: int = DENSE_LIMIT) -> SuperOperatorMatrix:
    """Column-stacking matrix of a generator.

    Raises
    ------
    DenseLimitError
        If the Hilbert dimension exceeds ``dense_limit``.
    """
    d = gen.dim
    if d > dense_limit:
        raise DenseLimitError(
            f"Hilbert dimension {d} exceeds the dense limit {dense_limit}; use action-form propagation"
        )
    eye = np.eye(d, dtype=complex)
    g = gen._drift
    mat = np.kron(eye, g) + np.kron(g.conj(), eye)
    for j in gen.jumps:
        mat += np.kron(j.conj(), j)
    return SuperOperatorMatrix(mat)


def projector_superop(projector: np.ndarray, tol: float = 1e-10) -> ProjectorSuperop:
    return ProjectorSuperop(projector, tol)


def conjugation_superop(unitary: np.ndarray) -> SuperOperatorMatrix:
    """Flattened ``x -> U x U^dag``."""
    u = np.asarray(unitary, dtype=complex)
    return SuperOperatorMatrix(np.kron(u.conj(), u))


def matrix_units(dim: int, levels: Sequence[int] | None = None, hermitian: bool = True):
    """Yield Hermitian (or plain) matrix units supported on ``levels``.

    With ``hermitian=True`` the off-diagonal units are symmetrized as
    ``|i><j| + |j><i|`` and ``i(|i><j| - |j><i|)``.
    """
    levels = range(dim) if levels is None else list(levels)
    for i in levels:
        for j in levels:
            if hermitian and j < i:
                continue
            e = np.zeros((dim, dim), dtype=complex)
            if not hermitian or i == j:
                e[i, j] = 1.0
                yield e
                continue
            e[i, j] = e[j, i] = 1.0
            yield e
            f = np.zeros((dim, dim), dtype=complex)
            f[i, j], f[j, i] = 1j, -1j
            yield f
