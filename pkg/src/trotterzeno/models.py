"""Bosonic models: polynomial Hamiltonians, OU and l-photon generators, cat codes."""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np
import scipy.linalg

from .exceptions import TruncationError
from .fock import (
    COHERENT_GUARD,
    FockBasis,
    annihilation,
    cat_state,
    coherent_tail_mass,
    identity,
)
from .liouville import Liouvillian, commutator_generator, flatten, gksl, unvec
from .propagators import Schedule, constant, expm

MAX_DEGREE = 4
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class Modulation:
    """Real time profile of a coefficient.

    ``const``: ``amplitude``; ``cos``/``sin``: ``amplitude * cos(omega t + phase)``
    (resp. sin); ``ramp``: ``amplitude * t / duration`` clipped to ``[0, amplitude]``.
    """

    kind: str = "const"
    amplitude: float = 1.0
    omega: float = 1.0
    phase: float = 0.0
    duration: float = 1.0

    def __post_init__(self):
        if self.kind not in ("const", "cos", "sin", "ramp"):
            raise ValueError(f"unknown modulation {self.kind!r}")
        if self.kind == "ramp" and not self.duration > 0:
            raise ValueError("ramp duration must be positive")

    def __call__(self, t: float) -> float:
        if self.kind == "const":
            return self.amplitude
        if self.kind == "cos":
            return self.amplitude * float(np.cos(self.omega * t + self.phase))
        if self.kind == "sin":
            return self.amplitude * float(np.sin(self.omega * t + self.phase))
        return self.amplitude * float(np.clip(t / self.duration, 0.0, 1.0))

    @property
    def constant(self) -> bool:
        return self.kind == "const"


CONSTANT = Modulation()


@dataclass(frozen=True)
class Monomial:
    """``coefficient * (a_j^dag)^k a_j^l`` on mode ``j`` (normal ordered)."""

    mode: int
    k: int
    l: int
    coefficient: complex = 1.0
    modulation: Modulation = CONSTANT

    @property
    def degree(self) -> int:
        return self.k + self.l


@dataclass(frozen=True)
class NumberTerm:
    """``coefficient * prod_j N_j^{p_j}``."""

    powers: tuple[int, ...]
    coefficient: float = 1.0
    modulation: Modulation = CONSTANT

    @property
    def degree(self) -> int:
        return 2 * sum(self.powers)


@dataclass(frozen=True)
class PolynomialSpec:
    """Decoupled polynomial Hamiltonian ``sum lambda_kl (a^dag)^k a^l + p(N_1, ..., N_m)``."""

    monomials: tuple[Monomial, ...] = ()
    number_terms: tuple[NumberTerm, ...] = ()
    max_degree: int = MAX_DEGREE

    def __post_init__(self):
        object.__setattr__(self, "monomials", tuple(self.monomials))
        object.__setattr__(self, "number_terms", tuple(self.number_terms))
        for m in self.monomials:
            if m.k < 0 or m.l < 0:
                raise ValueError("monomial powers must be non-negative")
            if m.degree > self.max_degree:
                raise ValueError(f"monomial degree {m.degree} exceeds the maximum {self.max_degree}")
        for term in self.number_terms:
            if any(p < 0 for p in term.powers):
                raise ValueError("number-operator powers must be non-negative")
            if term.degree > self.max_degree:
                raise ValueError(f"number term degree {term.degree} exceeds the maximum {self.max_degree}")

    @property
    def time_dependent(self) -> bool:
        return any(not m.modulation.constant for m in self.monomials + self.number_terms)

    def modulations(self) -> list[Modulation]:
        """Distinct modulations in order of first appearance."""
        seen: list[Modulation] = []
        for term in self.monomials + self.number_terms:
            if term.modulation not in seen:
                seen.append(term.modulation)
        return seen


def _matrix_power(op: np.ndarray, p: int) -> np.ndarray:
    return np.linalg.matrix_power(op, p) if p else np.eye(op.shape[0], dtype=complex)


def _assemble(spec: PolynomialSpec, basis: FockBasis, modulation: Modulation | None, t: float | None) -> np.ndarray:
    dim = basis.total_dim
    h = np.zeros((dim, dim), dtype=complex)
    for m in spec.monomials:
        if modulation is not None and m.modulation != modulation:
            continue
        scale = 1.0 if t is None else m.modulation(t)
        a = annihilation(basis, m.mode)
        h += scale * complex(m.coefficient) * (_matrix_power(a.conj().T, m.k) @ _matrix_power(a, m.l))
    for term in spec.number_terms:
        if modulation is not None and term.modulation != modulation:
            continue
        if len(term.powers) != basis.modes:
            raise ValueError(f"number term needs {basis.modes} powers, got {len(term.powers)}")
        scale = 1.0 if t is None else term.modulation(t)
        diag = np.ones(dim)
        for mode, p in enumerate(term.powers):
            diag = diag * basis.occupations(mode).astype(float) ** p
        h += scale * term.coefficient * np.diag(diag)
    return h


def _check_hermitian(h: np.ndarray, what: str) -> None:
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    if np.max(np.abs(h - h.conj().T), initial=0.0) > HERMITIAN_TOL * scale:
        raise ValueError(f"{what} is not Hermitian: pair every lambda_kl with conj(lambda_lk)")


def build_hamiltonian(spec: PolynomialSpec, basis: FockBasis, t: float | None = None) -> np.ndarray:
    """Dense Hamiltonian of ``spec``; modulations are evaluated at ``t`` if given.

    Raises
    ------
    ValueError
        If the result is not Hermitian within 1e-12.
    """
    for m in spec.monomials:
        basis._check_mode(m.mode)
    h = _assemble(spec, basis, None, t)
    _check_hermitian(h, "Hamiltonian")
    return h


def schedule_from_spec(spec: PolynomialSpec, basis: FockBasis, horizon: float) -> Schedule:
    """Commutator schedule with one term per distinct modulation.

    Each group of terms sharing a modulation must be Hermitian on its own so
    that the generator stays a commutator for every real coefficient value.
    """
    terms = []
    for mod in spec.modulations():
        h = _assemble(spec, basis, mod, None)
        _check_hermitian(h, f"terms with modulation {mod}")
        terms.append((constant(mod.amplitude) if mod.constant else mod, commutator_generator(h)))
    if not terms:
        return Schedule.zero(basis.total_dim, horizon)
    sched = Schedule(tuple(terms), horizon)
    sched.check_continuity()
    return sched


def ou_generator(basis: FockBasis, lam: float, mu: float, mode: int = 0) -> Liouvillian:
    """Quantum Ornstein-Uhlenbeck generator ``lam^2 D[a] + mu^2 D[a^dag]``."""
    if lam < 0 or mu < 0:
        raise ValueError("lam and mu must be non-negative")
    a = annihilation(basis, mode)
    return gksl(None, [lam * a, mu * a.conj().T], dim=basis.total_dim)


def ou_parts(basis: FockBasis, lam: float, mu: float, mode: int = 0) -> tuple[Liouvillian, Liouvillian]:
    """The two halves ``lam^2 D[a]`` and ``mu^2 D[a^dag]`` used as a splitting."""
    if lam < 0 or mu < 0:
        raise ValueError("lam and mu must be non-negative")
    a = annihilation(basis, mode)
    dim = basis.total_dim
    return gksl(None, [lam * a], dim=dim), gksl(None, [mu * a.conj().T], dim=dim)


def stationary_state(gen: Liouvillian) -> np.ndarray:
    """Unit-trace kernel element of the flattened generator (smallest singular vector)."""
    mat = np.asarray(flatten(gen))
    _, _, vh = np.linalg.svd(mat)
    rho = unvec(vh[-1].conj(), gen.dim)
    rho = rho / np.trace(rho)
    return (rho + rho.conj().T) / 2


def l_photon_jump(basis: FockBasis, l: int, alpha: complex, mode: int = 0) -> np.ndarray:
    a = annihilation(basis, mode)
    return np.linalg.matrix_power(a, l) - complex(alpha) ** l * identity(basis)


def l_photon_dissipation(
    basis: FockBasis,
    l: int,
    alpha: complex,
    mode: int = 0,
    guard: float = COHERENT_GUARD,
) -> Liouvillian:
    """Driven ``l``-photon dissipation ``D[a^l - alpha^l]``.

    Raises
    ------
    TruncationError
        If the cutoff is below ``l + 2`` or coherent states of amplitude
        ``alpha`` do not fit the cutoff within ``guard``.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    basis._check_mode(mode)
    d = basis.cutoffs[mode]
    if d < l + 2:
        raise TruncationError(f"cutoff {d} is too small for {l}-photon dissipation (need >= {l + 2})")
    tail = coherent_tail_mass(alpha, d)
    if tail > guard:
        raise TruncationError(f"alpha={alpha} loses tail mass {tail:.3e} beyond cutoff {d} (guard {guard:.1e})")
    return gksl(None, [l_photon_jump(basis, l, alpha, mode)], dim=basis.total_dim)


def cat_code_basis(basis: FockBasis, alpha: complex, mode: int = 0, guard: float = COHERENT_GUARD):
    """Normalized kets ``(|CAT+>, |CAT->)`` as amplitude vectors."""
    plus = cat_state(basis, alpha, "plus", mode, guard).amplitudes
    minus = cat_state(basis, alpha, "minus", mode, guard).amplitudes
    return plus, minus


def cat_projector(basis: FockBasis, alpha: complex, mode: int = 0, guard: float = COHERENT_GUARD) -> np.ndarray:
    """Rank-2 projection onto span{|CAT+>, |CAT->}."""
    plus, minus = cat_code_basis(basis, alpha, mode, guard)
    return np.outer(plus, plus.conj()) + np.outer(minus, minus.conj())


def logical_x(basis: FockBasis, alpha: complex, mode: int = 0, guard: float = COHERENT_GUARD) -> np.ndarray:
    """``|CAT+><CAT-| + |CAT-><CAT+|``."""
    plus, minus = cat_code_basis(basis, alpha, mode, guard)
    return np.outer(plus, minus.conj()) + np.outer(minus, plus.conj())


@dataclass
class GateTargets:
    """Code-block unitaries and superoperators of the Zeno rotation.

    Matrices are in the basis ``(|CAT+>, |CAT->)``; superoperators act on
    column-stacked 2x2 code-block operators.  ``idealized`` uses the
    generator ``2 Re(alpha) X``, ``compressed`` uses ``P H P`` itself.
    """

    idealized_unitary: np.ndarray
    compressed_unitary: np.ndarray
    idealized: np.ndarray
    compressed: np.ndarray
    discrepancy: float
    drive_element: complex
    code_basis: np.ndarray = field(repr=False)

    def embed(self, unitary: np.ndarray) -> np.ndarray:
        """Lift a code-block unitary to ``V u V^dag`` on the full space."""
        v = self.code_basis
        return v @ unitary @ v.conj().T


def zeno_gate_target(
    basis: FockBasis,
    alpha: complex,
    t: float,
    hamiltonian: np.ndarray | None = None,
    mode: int = 0,
    guard: float = COHERENT_GUARD,
) -> GateTargets:
    """Targets of the Zeno-projected drive ``H = a + a^dag`` on the cat code.

    The Zeno limit of ``x -> -i[H, x]`` is ``x -> U x U^dag`` with
    ``U = exp(-i t P H P)`` on the code block.  On an untruncated space
    ``P H P`` approaches ``2 Re(alpha) X`` for large ``|alpha|``; the
    idealized target uses that form, the compressed one the exact
    matrix product.
    """
    plus, minus = cat_code_basis(basis, alpha, mode, guard)
    v = np.column_stack([plus, minus])
    if hamiltonian is None:
        a = annihilation(basis, mode)
        hamiltonian = a + a.conj().T
    block = v.conj().T @ np.asarray(hamiltonian) @ v
    theta = 2.0 * t * complex(alpha).real
    x2 = np.array([[0, 1], [1, 0]], dtype=complex)
    ideal_u = np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * x2
    comp_u = expm(block, -1j * t)
    ideal = np.kron(ideal_u.conj(), ideal_u)
    comp = np.kron(comp_u.conj(), comp_u)
    return GateTargets(
        idealized_unitary=ideal_u,
        compressed_unitary=comp_u,
        idealized=ideal,
        compressed=comp,
        discrepancy=float(scipy.linalg.svdvals(ideal - comp)[0]),
        drive_element=complex(block[1, 0]),
        code_basis=v,
    )
