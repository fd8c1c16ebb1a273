"""Truncated Fock-space linear algebra.

States and operators live on ``atom (x) field`` with the atom index varying
slowest, so the basis vector ``|j, n>`` sits at position ``j * fock_dim + n``.
Atomic levels are labelled 1..atom_dim in the physics and stored at indices
0..atom_dim-1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaln
from scipy.stats import poisson

from .errors import DimensionMismatch, TruncationTooSmall

TAIL_TOL = 1e-10


@dataclass(frozen=True)
class TruncatedSpace:
    fock_dim: int
    atom_dim: int = 1

    def __post_init__(self):
        if int(self.fock_dim) != self.fock_dim or self.fock_dim < 2:
            raise ValueError(f"fock_dim must be an integer >= 2, got {self.fock_dim}")
        if self.atom_dim not in (1, 2, 3):
            raise ValueError(f"atom_dim must be 1, 2 or 3, got {self.atom_dim}")

    @property
    def dim(self) -> int:
        return self.atom_dim * self.fock_dim

    def field_only(self) -> "TruncatedSpace":
        return TruncatedSpace(self.fock_dim, 1)

    def with_atom(self, atom_dim: int) -> "TruncatedSpace":
        return TruncatedSpace(self.fock_dim, atom_dim)

    def basis_index(self, level: int, n: int) -> int:
        """Position of ``|level, n>`` (level is 1-based)."""
        if not 1 <= level <= self.atom_dim or not 0 <= n < self.fock_dim:
            raise IndexError((level, n))
        return (level - 1) * self.fock_dim + n


@dataclass(frozen=True)
class AtomSpace:
    """Space of a bare atom, the target of tracing out the field."""

    atom_dim: int

    @property
    def dim(self) -> int:
        return self.atom_dim


@dataclass(frozen=True, eq=False)
class FieldOperator:
    space: TruncatedSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise DimensionMismatch(f"matrix {m.shape} does not match space dim {self.space.dim}")
        object.__setattr__(self, "matrix", m)

    def dag(self) -> "FieldOperator":
        return FieldOperator(self.space, self.matrix.conj().T)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) < tol)

    def is_unitary(self, tol: float = 1e-10) -> bool:
        eye = np.eye(self.space.dim)
        return bool(np.max(np.abs(self.matrix.conj().T @ self.matrix - eye)) < tol)

    def __matmul__(self, other):
        if isinstance(other, FieldOperator):
            _check_same(self.space, other.space)
            return FieldOperator(self.space, self.matrix @ other.matrix)
        if isinstance(other, StateVector):
            _check_same(self.space, other.space)
            return StateVector(self.space, self.matrix @ other.amplitudes, normalized=False)
        return NotImplemented


@dataclass(frozen=True, eq=False)
class StateVector:
    space: TruncatedSpace
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if v.shape != (self.space.dim,):
            raise DimensionMismatch(f"vector of length {v.size} does not match space dim {self.space.dim}")
        if self.normalized and abs(np.vdot(v, v).real - 1.0) > 1e-8:
            raise ValueError(f"state norm^2 {np.vdot(v, v).real!r} deviates from 1")
        object.__setattr__(self, "amplitudes", v)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "StateVector":
        return StateVector(self.space, self.amplitudes / self.norm)

    def overlap(self, other: "StateVector") -> complex:
        """<self|other>."""
        _check_same(self.space, other.space)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density(self) -> "DensityMatrix":
        v = self.amplitudes / self.norm
        return DensityMatrix(self.space, np.outer(v, v.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    space: TruncatedSpace | AtomSpace
    matrix: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise DimensionMismatch(f"matrix {m.shape} does not match space dim {self.space.dim}")
        object.__setattr__(self, "matrix", m)
        if not self.validate:
            return
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-8:
            raise ValueError(f"density matrix trace {np.trace(m).real!r} deviates from 1")
        if np.linalg.eigvalsh(m).min() < -1e-8:
            raise ValueError("density matrix has negative eigenvalues")

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def purity(self) -> float:
        return float(np.real(np.einsum("ij,ji->", self.matrix, self.matrix)))

    def expect(self, op) -> complex:
        m = op.matrix if isinstance(op, FieldOperator) else np.asarray(op)
        return complex(np.einsum("ij,ji->", m, self.matrix))

    def fidelity(self, psi: StateVector) -> float:
        """<psi|rho|psi> for a pure reference state."""
        _check_same(self.space, psi.space)
        v = psi.amplitudes
        return float(np.real(np.vdot(v, self.matrix @ v)))


def _check_same(a: TruncatedSpace, b: TruncatedSpace):
    if a != b:
        raise DimensionMismatch(f"{a} != {b}")


# --- sizing -----------------------------------------------------------------

def poisson_tail(mean_photon: float, fock_dim: int) -> float:
    """Probability mass a Poisson(mean_photon) puts on n >= fock_dim."""
    if mean_photon == 0:
        return 0.0
    return float(poisson.sf(fock_dim - 1, mean_photon))


def fock_dim_for(alpha_max: complex | float, tail_tol: float = TAIL_TOL) -> int:
    """Truncation large enough to hold a coherent amplitude ``alpha_max``.

    Starts from max(16, ceil(|a|^2 + 8 sqrt(|a|^2 + 1))) and grows until the
    Poisson tail is below ``tail_tol``.
    """
    m = abs(alpha_max) ** 2
    dim = max(16, math.ceil(m + 8.0 * math.sqrt(m + 1.0)))
    while poisson_tail(m, dim) >= tail_tol:
        dim += 1
    return dim


def _require_tail(alpha: complex, fock_dim: int):
    tail = poisson_tail(abs(alpha) ** 2, fock_dim)
    if tail >= TAIL_TOL:
        raise TruncationTooSmall(
            f"|alpha|={abs(alpha):.4g} leaves Poisson tail {tail:.3g} beyond fock_dim={fock_dim}"
        )


# --- operators --------------------------------------------------------------

def _field_annihilation(fock_dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, fock_dim, dtype=float)), 1).astype(complex)


def _lift(space: TruncatedSpace, field_op: np.ndarray) -> np.ndarray:
    if space.atom_dim == 1:
        return field_op
    return np.kron(np.eye(space.atom_dim), field_op)


def annihilation_op(space: TruncatedSpace) -> FieldOperator:
    return FieldOperator(space, _lift(space, _field_annihilation(space.fock_dim)))


def creation_op(space: TruncatedSpace) -> FieldOperator:
    return annihilation_op(space).dag()


def number_op(space: TruncatedSpace) -> FieldOperator:
    n = np.diag(np.arange(space.fock_dim, dtype=float)).astype(complex)
    return FieldOperator(space, _lift(space, n))


def parity_op(space: TruncatedSpace) -> FieldOperator:
    p = np.diag((-1.0) ** np.arange(space.fock_dim)).astype(complex)
    return FieldOperator(space, _lift(space, p))


def atom_matrix(space: TruncatedSpace, atom_op: np.ndarray) -> np.ndarray:
    """Embed an ``atom_dim x atom_dim`` matrix as ``atom_op (x) 1_field``."""
    atom_op = np.asarray(atom_op, dtype=complex)
    if atom_op.shape != (space.atom_dim, space.atom_dim):
        raise DimensionMismatch(f"atomic matrix {atom_op.shape} for atom_dim={space.atom_dim}")
    return np.kron(atom_op, np.eye(space.fock_dim))


def atom_transition(space: TruncatedSpace, to_level: int, from_level: int) -> FieldOperator:
    """``|to><from| (x) 1``. Projectors S^JJ use to == from; the raising
    operator S^{ij}_+ of an (i, j) pair is ``atom_transition(space, j, i)``."""
    m = np.zeros((space.atom_dim, space.atom_dim))
    m[to_level - 1, from_level - 1] = 1.0
    return FieldOperator(space, atom_matrix(space, m))


def atom_projector(space: TruncatedSpace, level: int) -> FieldOperator:
    return atom_transition(space, level, level)


# --- states -----------------------------------------------------------------

def fock_state(space: TruncatedSpace, n: int, level: int = 1) -> StateVector:
    v = np.zeros(space.dim, dtype=complex)
    v[space.basis_index(level, n)] = 1.0
    return StateVector(space, v)


def coherent_amplitudes(alpha: complex, fock_dim: int) -> np.ndarray:
    """Untruncated-normalisation amplitudes exp(-|a|^2/2) a^n / sqrt(n!), n < fock_dim."""
    n = np.arange(fock_dim)
    if alpha == 0:
        out = np.zeros(fock_dim, dtype=complex)
        out[0] = 1.0
        return out
    log_mag = n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1) - 0.5 * abs(alpha) ** 2
    return np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))


def coherent_state(space: TruncatedSpace, alpha: complex) -> StateVector:
    if space.atom_dim != 1:
        raise DimensionMismatch("coherent_state needs a field-only space")
    _require_tail(alpha, space.fock_dim)
    c = coherent_amplitudes(alpha, space.fock_dim)
    return StateVector(space, c / np.linalg.norm(c))


def displacement_op(space: TruncatedSpace, beta: complex) -> FieldOperator:
    _require_tail(beta, space.fock_dim)
    a = _field_annihilation(space.fock_dim)
    d = expm(beta * a.conj().T - np.conj(beta) * a)
    op = FieldOperator(space, _lift(space, d))
    if not op.is_unitary(1e-8):
        raise TruncationTooSmall("truncated displacement lost unitarity")
    return op


# --- reduction and phase space ----------------------------------------------

def partial_trace(rho: DensityMatrix, keep: str) -> DensityMatrix:
    """Reduce a joint atom-field state to the ``"atom"`` or the ``"field"`` factor."""
    sp = rho.space
    if sp.atom_dim < 2:
        raise DimensionMismatch("partial_trace needs an atom factor")
    if keep == "atom":
        return DensityMatrix(AtomSpace(sp.atom_dim), reduced_atom(rho.matrix, sp), validate=False)
    if keep == "field":
        return DensityMatrix(sp.field_only(), reduced_field(rho.matrix, sp), validate=False)
    raise ValueError(f"keep must be 'atom' or 'field', got {keep!r}")


def reduced_atom(matrix_or_state, space: TruncatedSpace) -> np.ndarray:
    """Atomic reduced matrix straight from an array (vector or density matrix)."""
    x = np.asarray(matrix_or_state)
    if x.ndim == 1:
        v = x.reshape(space.atom_dim, space.fock_dim)
        return v @ v.conj().T
    r = x.reshape(space.atom_dim, space.fock_dim, space.atom_dim, space.fock_dim)
    return np.einsum("injn->ij", r)


def reduced_field(matrix_or_state, space: TruncatedSpace) -> np.ndarray:
    x = np.asarray(matrix_or_state)
    if x.ndim == 1:
        v = x.reshape(space.atom_dim, space.fock_dim)
        return v.T @ v.conj()
    r = x.reshape(space.atom_dim, space.fock_dim, space.atom_dim, space.fock_dim)
    return np.einsum("imin->mn", r)


def wigner(rho: DensityMatrix, xvec, yvec) -> np.ndarray:
    """Wigner function W(beta) = (2/pi) Tr[rho D(beta) P D(-beta)], P the parity.

    Evaluated with the closed-form Laguerre matrix elements of the displaced
    parity, so the displacement is not truncated. Returns an array of shape
    ``(len(yvec), len(xvec))`` with beta = x + i y.
    """
    if rho.space.atom_dim != 1:
        raise DimensionMismatch("wigner needs a field-only state")
    m_rho = rho.matrix
    xs, ys = np.meshgrid(np.asarray(xvec, float), np.asarray(yvec, float))
    beta = xs + 1j * ys
    b4 = 4.0 * np.abs(beta) ** 2
    dim = rho.space.fock_dim
    w = np.zeros(beta.shape)
    for m in range(dim):
        if m_rho[m, m] != 0:
            w += np.real(m_rho[m, m]) * (-1) ** m * eval_genlaguerre(m, 0, b4)
        for n in range(m + 1, dim):
            c = m_rho[m, n]
            if c == 0:
                continue
            k = n - m
            scale = math.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)))
            w += 2.0 * np.real(c * (2.0 * beta) ** k) * (-1) ** m * scale * eval_genlaguerre(m, k, b4)
    return (2.0 / math.pi) * w * np.exp(-b4 / 2.0)


def wigner_point_direct(rho: DensityMatrix, beta: complex) -> float:
    """Wigner value from the operator definition with a truncated displacement."""
    d = displacement_op(rho.space, beta).matrix
    par = parity_op(rho.space).matrix
    val = np.trace(rho.matrix @ d @ par @ d.conj().T)
    return float((2.0 / math.pi) * val.real)
