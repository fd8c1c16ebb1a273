"""Observables shared by the analytic assembler and both integrators."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import pdf_moments_q
from .errors import NotPure
from .fock import DensityMatrix, StateVector, TruncatedSpace, reduced_atom, reduced_field


@dataclass(frozen=True)
class ObservableSet:
    mean_photon: float
    populations: np.ndarray
    photon_pdf: np.ndarray
    q: float
    entropy_bits: float
    inversion: float

    @property
    def p1(self) -> float:
        return float(self.populations[0])

    @property
    def p2(self) -> float:
        return float(self.populations[1]) if self.populations.size > 1 else 0.0

    @property
    def p3(self) -> float:
        return float(self.populations[2]) if self.populations.size > 2 else 0.0


def von_neumann_entropy(matrix: np.ndarray) -> float:
    """Entropy in bits of a (possibly unnormalised) Hermitian matrix."""
    m = np.asarray(matrix)
    m = m / np.trace(m).real
    lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    lam = lam[lam > 1e-15]
    return float(-(lam * np.log2(lam)).sum()) if lam.size else 0.0


def batched_entropy(matrices: np.ndarray) -> np.ndarray:
    """Entropies (bits) of a stack of small Hermitian matrices, shape (..., d, d)."""
    m = np.asarray(matrices)
    tr = np.einsum("...ii->...", m).real
    m = m / tr[..., None, None]
    lam = np.linalg.eigvalsh(0.5 * (m + np.swapaxes(m.conj(), -1, -2)))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(lam > 1e-15, -lam * np.log2(np.where(lam > 1e-15, lam, 1.0)), 0.0)
    return terms.sum(axis=-1)


def _array_and_space(state):
    if isinstance(state, StateVector):
        return state.amplitudes / state.norm, state.space
    if isinstance(state, DensityMatrix):
        return state.matrix, state.space
    raise TypeError(f"expected StateVector or DensityMatrix, got {type(state).__name__}")


def atom_populations(x: np.ndarray, space: TruncatedSpace) -> np.ndarray:
    if x.ndim == 1:
        return (np.abs(x.reshape(space.atom_dim, space.fock_dim)) ** 2).sum(axis=1)
    d = np.diagonal(x).real.reshape(space.atom_dim, space.fock_dim)
    return d.sum(axis=1)


def photon_distribution(x: np.ndarray, space: TruncatedSpace) -> np.ndarray:
    if x.ndim == 1:
        return (np.abs(x.reshape(space.atom_dim, space.fock_dim)) ** 2).sum(axis=0)
    d = np.diagonal(x).real.reshape(space.atom_dim, space.fock_dim)
    return d.sum(axis=0)


def extract(state) -> ObservableSet:
    x, space = _array_and_space(state)
    pdf = photon_distribution(x, space)
    n = np.arange(space.fock_dim)
    pops = atom_populations(x, space)
    if space.atom_dim > 1:
        entropy = von_neumann_entropy(reduced_atom(x, space))
        inv = float(pops[0] - pops[1])
    else:
        entropy = 0.0
        inv = 0.0
    return ObservableSet(
        mean_photon=float(pdf @ n),
        populations=pops,
        photon_pdf=pdf,
        q=float(pdf_moments_q(pdf)),
        entropy_bits=entropy,
        inversion=inv,
    )


def entropy_pair_check(state) -> tuple[float, float, float]:
    """(S_A, S_F, |S_A - S_F|) for a pure joint state."""
    x, space = _array_and_space(state)
    if x.ndim == 2:
        purity = float(np.real(np.einsum("ij,ji->", x, x)))
        if purity < 1.0 - 1e-8:
            raise NotPure(f"purity {purity:.3g}")
    s_a = von_neumann_entropy(reduced_atom(x, space))
    s_f = von_neumann_entropy(reduced_field(x, space))
    return s_a, s_f, abs(s_a - s_f)


def max_entropy_bits(atom_dim: int) -> float:
    return math.log2(atom_dim)
