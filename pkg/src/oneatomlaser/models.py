"""Parameters and Hamiltonians for the three-level Lambda atom and its
strongly-driven two-level reduction.

All frequencies are measured in units of the large detuning Delta and time in
units of 1/Delta (hbar = 1).  The full model is written in the interaction
picture where only the Omega laser keeps an explicit time dependence,
``exp(i (1 - delta_prime) t)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DimensionMismatch
from .fock import FieldOperator, TruncatedSpace, annihilation_op, atom_matrix, number_op

FULL = "full-lambda"
DRIVEN = "effective-driven"
FINAL = "effective-final"
KINDS = (FULL, DRIVEN, FINAL)

PASS_BELOW = 0.15
WARN_BELOW = 0.35


@dataclass(frozen=True)
class LambdaParams:
    delta_prime: float
    g: float
    omega: float
    omega1p: float
    omega2p: float
    kappa: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.delta_prime < 1.0:
            raise ValueError(f"delta_prime must lie in (0, 1), got {self.delta_prime}")
        for name in ("g", "omega", "omega1p", "omega2p", "kappa"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def drive_frequency(self) -> float:
        """Frequency of the residual time dependence, (Delta - Delta')/Delta."""
        return 1.0 - self.delta_prime


@dataclass(frozen=True)
class EffectiveParams:
    g_eff: float
    omega_eff: float
    kappa: float = 0.0

    def __post_init__(self):
        for name in ("g_eff", "omega_eff", "kappa"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def mean_photon_ss(self) -> float:
        return (self.g_eff / self.kappa) ** 2 if self.kappa > 0 else float("inf")


def effective_params(p: LambdaParams) -> EffectiveParams:
    """g_eff = g Omega / Delta', Omega_eff = Omega Omega'_2 / Delta'."""
    return EffectiveParams(
        g_eff=p.g * p.omega / p.delta_prime,
        omega_eff=p.omega * p.omega2p / p.delta_prime,
        kappa=p.kappa,
    )


def second_order_params(p: LambdaParams) -> EffectiveParams:
    """Couplings of the two decoupled Lambda schemes: g Omega / Delta and
    Omega'_1 Omega'_2 / Delta'.

    These are the resonant two-photon amplitudes of the full Hamiltonian
    (both legs of the cavity-assisted Raman process are detuned by Delta),
    and they set the time scales observed in the full-model numerics.
    """
    return EffectiveParams(
        g_eff=p.g * p.omega,
        omega_eff=p.omega1p * p.omega2p / p.delta_prime,
        kappa=p.kappa,
    )


@dataclass(frozen=True, eq=False)
class PeriodicHamiltonian:
    """H(t) = static + exp(i w t) raising + exp(-i w t) raising^dagger."""

    space: TruncatedSpace
    static: np.ndarray
    raising: np.ndarray
    frequency: float
    _stack: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        st = np.asarray(self.static, dtype=complex)
        rs = np.asarray(self.raising, dtype=complex)
        if st.shape != (self.space.dim,) * 2 or rs.shape != st.shape:
            raise DimensionMismatch("Hamiltonian parts do not match the space")
        object.__setattr__(self, "static", st)
        object.__setattr__(self, "raising", rs)
        object.__setattr__(self, "_stack", np.vstack([st, rs, rs.conj().T]))

    def matrix(self, t: float) -> np.ndarray:
        e = np.exp(1j * self.frequency * t)
        return self.static + e * self.raising + np.conj(e) * self.raising.conj().T

    def at(self, t: float) -> FieldOperator:
        return FieldOperator(self.space, self.matrix(t))

    def apply(self, t: float, psi: np.ndarray) -> np.ndarray:
        """H(t) @ psi for a vector or a (dim, batch) block."""
        d = self.space.dim
        r = self._stack @ psi
        e = np.exp(1j * self.frequency * t)
        return r[:d] + e * r[d:2 * d] + np.conj(e) * r[2 * d:]

    def norm_bound(self) -> float:
        return float(np.linalg.norm(self.static, 2) + 2.0 * np.linalg.norm(self.raising, 2))


@dataclass(frozen=True)
class HamiltonianSpec:
    kind: str
    space: TruncatedSpace
    params: Union[LambdaParams, EffectiveParams]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}")
        need = 3 if self.kind == FULL else 2
        if self.space.atom_dim != need:
            raise DimensionMismatch(f"{self.kind} needs atom_dim={need}, got {self.space.atom_dim}")
        want = LambdaParams if self.kind == FULL else EffectiveParams
        if not isinstance(self.params, want):
            raise TypeError(f"{self.kind} needs {want.__name__}")

    def build(self):
        """PeriodicHamiltonian for the full model, FieldOperator otherwise."""
        if self.kind == FULL:
            return full_hamiltonian(self.params, self.space)
        return build_effective_hamiltonian(self.params, self.space, self.kind)


def _atom(space, to_level, from_level):
    m = np.zeros((space.atom_dim, space.atom_dim))
    m[to_level - 1, from_level - 1] = 1.0
    return m


def full_hamiltonian(p: LambdaParams, space: TruncatedSpace) -> PeriodicHamiltonian:
    if space.atom_dim != 3:
        raise DimensionMismatch("the Lambda model needs atom_dim=3")
    nf = space.fock_dim
    a = annihilation_op(space.field_only()).matrix
    eye_f = np.eye(nf)
    s33 = _atom(space, 3, 3)
    s23p = _atom(space, 3, 2)  # |3><2|
    s13p = _atom(space, 3, 1)  # |3><1|

    static = -p.delta_prime * np.eye(space.dim) + p.delta_prime * atom_matrix(space, s33)
    static = static - (1.0 - p.delta_prime) * number_op(space).matrix
    cav = np.kron(s23p, p.g * a + p.omega2p * eye_f)
    static = static + cav + cav.conj().T
    las = p.omega1p * atom_matrix(space, s13p)
    static = static + las + las.conj().T
    raising = p.omega * atom_matrix(space, s13p)
    return PeriodicHamiltonian(space, static, raising, p.drive_frequency)


def build_full_hamiltonian(p: LambdaParams, space: TruncatedSpace, t: float) -> FieldOperator:
    """Full three-level Hamiltonian at dimensionless time ``t``:

    -D' + D' S33 - (1 - D') a^dag a + [(g a + W2') S23_+ + h.c.]
        + W1' [b_t S13_+ + h.c.],   b_t = 1 + (W / W1') exp(i (1 - D') t)
    """
    return full_hamiltonian(p, space).at(t)


def build_effective_hamiltonian(e: EffectiveParams, space: TruncatedSpace, kind: str = FINAL) -> FieldOperator:
    """Two-level Hamiltonians with S_+ = |2><1|.

    ``effective-driven``: -g_eff (a^dag S_+ + a S_-) - W_eff (S_+ + S_-)
    ``effective-final``:  -(g_eff / 2) (a^dag + a)(S_+ + S_-)
    """
    if space.atom_dim != 2:
        raise DimensionMismatch("effective Hamiltonians need atom_dim=2")
    a = annihilation_op(space.field_only()).matrix
    sp = _atom(space, 2, 1)
    sx = sp + sp.T
    if kind == DRIVEN:
        jc = np.kron(sp, a.conj().T)
        h = -e.g_eff * (jc + jc.conj().T) - e.omega_eff * atom_matrix(space, sx)
    elif kind == FINAL:
        h = -0.5 * e.g_eff * np.kron(sx, a + a.conj().T)
    else:
        raise ValueError(f"not an effective kind: {kind!r}")
    return FieldOperator(space, h)


@dataclass(frozen=True)
class ValidityCheck:
    name: str
    value: float
    status: str


def _grade(value: float) -> str:
    if value < PASS_BELOW:
        return "pass"
    if value < WARN_BELOW:
        return "warn"
    return "fail"


def check_validity(p: LambdaParams) -> dict[str, ValidityCheck]:
    """Small-parameter margins behind the two-level reduction and the RWA.

    Each value must be << 1; graded pass below 0.15, warn below 0.35, else fail.
    """
    e = effective_params(p)
    detuning = 1.0 - p.delta_prime
    values = {
        "omega1p/delta_prime": p.omega1p / p.delta_prime,
        "(omega/delta_prime)^2": (p.omega / p.delta_prime) ** 2,
        "g/delta": p.g,
        "(omega2p/delta)^2": p.omega2p ** 2,
        "((delta-delta_prime)/delta)^2": detuning ** 2,
        "g_eff/omega_eff": e.g_eff / e.omega_eff if e.omega_eff > 0 else float("inf"),
    }
    return {k: ValidityCheck(k, float(v), _grade(v)) for k, v in values.items()}


def overall_status(report: dict[str, ValidityCheck]) -> str:
    order = {"pass": 0, "warn": 1, "fail": 2}
    return max((c.status for c in report.values()), key=order.__getitem__)
