"""Closed-form solution of the strongly-driven one-atom laser master equation.

Starting from ``|1>|0>``, the joint state is fixed at all times by a coherent
amplitude alpha(t) and the coherence factor f(t):

    rho_AF = 1/2 |+><+| |a><a| + 1/2 |-><-| |-a><-a|
           + c |+><-| |a><-a| + c |-><+| |-a><a|,   c = f exp(2|a|^2) / 2

with |+-> = (|1> +- |2>)/sqrt(2).  Everything here is vectorised over ``t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import NegativeProbability
from .fock import DensityMatrix, StateVector, TruncatedSpace, coherent_state, fock_dim_for

BRANCHES = (1, 2)
PLUS = np.array([1.0, 1.0]) / math.sqrt(2.0)
MINUS = np.array([1.0, -1.0]) / math.sqrt(2.0)


@dataclass(frozen=True)
class AnalyticSolution:
    g_eff: float
    kappa: float = 0.0

    def __post_init__(self):
        if self.g_eff < 0 or self.kappa < 0:
            raise ValueError("g_eff and kappa must be non-negative")

    @classmethod
    def from_mean_photon(cls, n_ss: float, kappa: float = 1.0) -> "AnalyticSolution":
        """Solution with steady-state photon number ``n_ss = (g_eff/kappa)^2``."""
        return cls(g_eff=kappa * math.sqrt(n_ss), kappa=kappa)

    @property
    def unitary_limit(self) -> bool:
        return self.kappa == 0

    @property
    def mean_photon_ss(self) -> float:
        if self.unitary_limit:
            return math.inf
        return (self.g_eff / self.kappa) ** 2


@dataclass(frozen=True)
class ConditionalFieldState:
    branch: int
    alpha: complex
    f: float
    probability: float


def _as_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    return t


def _scalar(x):
    return np.asarray(x).item() if np.ndim(x) == 0 else x


def alpha_t(sol: AnalyticSolution, t):
    """alpha(t) = i (g/k)(1 - exp(-k t/2)); i g t / 2 when k = 0."""
    t = _as_time(t)
    if sol.unitary_limit:
        return _scalar(0.5j * sol.g_eff * t)
    return _scalar(1j * (sol.g_eff / sol.kappa) * -np.expm1(-0.5 * sol.kappa * t))


def _ramp(x):
    """x - 1 + exp(-x), accurate for small x."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-2
    out = np.empty_like(x)
    xs = x[small]
    out[small] = xs ** 2 / 2 - xs ** 3 / 6 + xs ** 4 / 24 - xs ** 5 / 120
    xl = x[~small]
    out[~small] = xl + np.expm1(-xl)
    return out


def log_f_t(sol: AnalyticSolution, t):
    t = _as_time(t)
    if sol.unitary_limit:
        return _scalar(-0.5 * sol.g_eff ** 2 * t ** 2)
    # -2 g^2 t / k + 4 (g/k)^2 (1 - exp(-k t / 2)) = -4 (g/k)^2 ramp(k t / 2)
    return _scalar(-4.0 * (sol.g_eff / sol.kappa) ** 2 * _ramp(0.5 * sol.kappa * t))


def f_t(sol: AnalyticSolution, t):
    """Coherence factor f(t); equals the atomic inversion p1 - p2."""
    return _scalar(np.exp(log_f_t(sol, t)))


inversion = f_t


def mean_photon(sol: AnalyticSolution, t):
    return _scalar(np.abs(alpha_t(sol, t)) ** 2)


def photon_pdf(sol: AnalyticSolution, t: float, n):
    """Poisson(|alpha(t)|^2) mass at ``n``."""
    n = np.asarray(n)
    return _scalar(_poisson(mean_photon(sol, t), n))


def _poisson(mean, n):
    n = np.asarray(n, dtype=float)
    if mean == 0:
        return (n == 0).astype(float)
    return np.exp(n * math.log(mean) - mean - gammaln(n + 1))


def _coherence_ratio(sol, t):
    """f / exp(-2|alpha|^2), the weight of the cat interference term."""
    return float(np.exp(log_f_t(sol, t) + 2.0 * mean_photon(sol, t)))


def conditional_photon_pdf(sol: AnalyticSolution, t: float, branch: int, n):
    """Photon distribution after finding the atom in |1> (branch 1) or |2>."""
    if branch not in BRANCHES:
        raise ValueError(f"branch must be 1 or 2, got {branch}")
    x = mean_photon(sol, t)
    f = f_t(sol, t)
    ratio = _coherence_ratio(sol, t)
    if ratio > 1.0 + 1e-12 * math.exp(2 * x):
        raise NegativeProbability(f"f={f!r} exceeds exp(-2|alpha|^2)={math.exp(-2 * x)!r}")
    sign = 1.0 if branch == 1 else -1.0
    n = np.asarray(n)
    parity = np.where(n % 2 == 0, 1.0, -1.0)
    denom = 1.0 + sign * f
    if denom == 0.0:
        # t = 0, branch 2: the branch has zero probability
        return _scalar(np.zeros(n.shape))
    return _scalar(_poisson(x, n) * (1.0 + sign * parity * ratio) / denom)


def branch_probability(sol: AnalyticSolution, t, branch: int):
    sign = 1.0 if branch == 1 else -1.0
    return _scalar(0.5 * (1.0 + sign * np.asarray(f_t(sol, t))))


def conditional_field(sol: AnalyticSolution, t: float, branch: int) -> ConditionalFieldState:
    return ConditionalFieldState(branch, complex(alpha_t(sol, t)), float(f_t(sol, t)),
                                 float(branch_probability(sol, t, branch)))


def pdf_moments_q(pdf: np.ndarray) -> float:
    """Mandel-Fano Q of a photon distribution by direct summation (0 if <N> = 0)."""
    pdf = np.asarray(pdf, dtype=float)
    n = np.arange(pdf.shape[-1], dtype=float)
    norm = pdf.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        m1 = np.where(norm > 0, (pdf * n).sum(axis=-1) / norm, 0.0)
        m2 = np.where(norm > 0, (pdf * n * n).sum(axis=-1) / norm, 0.0)
        q = np.where(m1 > 0, (m2 - m1 ** 2) / np.where(m1 > 0, m1, 1.0) - 1.0, 0.0)
    return _scalar(q)


SUPPORT_TAIL = 1e-16


def support_size(sol: AnalyticSolution, t) -> int:
    """Photon-number cutoff for pdf sums; the Poisson tail beyond it is < 1e-16."""
    return fock_dim_for(np.sqrt(np.max(np.atleast_1d(mean_photon(sol, t)))), SUPPORT_TAIL)


def mandel_q(sol: AnalyticSolution, t, branch: int | None = None):
    """Mandel-Fano Q of the unconditional (``branch=None``) or conditional field."""
    ts = np.atleast_1d(_as_time(t))
    n = np.arange(support_size(sol, ts))
    out = np.empty(ts.shape)
    for i, ti in enumerate(ts):
        if branch is None:
            pdf = photon_pdf(sol, ti, n)
        else:
            pdf = conditional_photon_pdf(sol, ti, branch, n)
        out[i] = pdf_moments_q(pdf)
    return _scalar(out.reshape(np.shape(t)))


def atom_density(sol: AnalyticSolution, t, basis: str = "pm") -> np.ndarray:
    """Reduced atomic matrix, in the {|+>,|->} (``"pm"``) or {|1>,|2>} basis."""
    f = float(f_t(sol, t))
    if basis == "pm":
        return 0.5 * np.array([[1.0, f], [f, 1.0]], dtype=complex)
    if basis == "bare":
        return 0.5 * np.array([[1.0 + f, 0.0], [0.0, 1.0 - f]], dtype=complex)
    raise ValueError(f"unknown basis {basis!r}")


def populations(sol: AnalyticSolution, t):
    """(p1, p2, p3); the upper level stays empty in the effective model."""
    f = np.asarray(f_t(sol, t))
    return _scalar(0.5 * (1 + f)), _scalar(0.5 * (1 - f)), _scalar(np.zeros_like(f))


def binary_entropy(p):
    """-p log2 p - (1-p) log2 (1-p), with 0 log 0 = 0."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(np.where(p > 0, p, 1.0)) + (1 - p) * np.log2(np.where(p < 1, 1 - p, 1.0)))
    return _scalar(h)


def entanglement_entropy(sol: AnalyticSolution, t, short_time: bool = False):
    """Von Neumann entropy (bits) of the reduced atom.

    Eigenvalues are (1 +- f)/2.  With ``short_time=True`` f is replaced by its
    unitary-limit form exp(-g^2 t^2 / 2), valid for k t << 1.
    """
    if short_time:
        f = np.exp(-0.5 * sol.g_eff ** 2 * np.asarray(_as_time(t)) ** 2)
    else:
        f = np.asarray(f_t(sol, t))
    return binary_entropy(0.5 * (1.0 + f))


def inflection_time(sol: AnalyticSolution) -> float:
    """Inflection point of f(t): -(2/k) ln(1 + (1 - sqrt(1 + 16 N)) / (8 N))."""
    n = sol.mean_photon_ss
    if not 0 < n < math.inf:
        raise ValueError("inflection time needs 0 < <N>_ss < inf")
    u = 1.0 + (1.0 - math.sqrt(1.0 + 16.0 * n)) / (8.0 * n)
    return -2.0 / sol.kappa * math.log(u)


def decoherence_rates(sol: AnalyticSolution) -> tuple[float, float]:
    """(gamma_D, gamma'_D) = (k (sqrt(1 + 16 N) - 1) / 4, 2 k N)."""
    n = sol.mean_photon_ss
    if not 0 < n < math.inf:
        raise ValueError("decoherence rates need 0 < <N>_ss < inf")
    return sol.kappa * (math.sqrt(1.0 + 16.0 * n) - 1.0) / 4.0, 2.0 * sol.kappa * n


def exponential_tail(sol: AnalyticSolution, t):
    """Tangent exponential of f at the inflection point."""
    t_f = inflection_time(sol)
    gamma_d, _ = decoherence_rates(sol)
    return _scalar(f_t(sol, t_f) * np.exp(-gamma_d * (np.asarray(t) - t_f)))


# --- states in a truncated space --------------------------------------------

def joint_state(sol: AnalyticSolution, t: float, space: TruncatedSpace):
    """Field blocks (rho_1F, rho_2F, rho_3F, rho_4F) as arrays on ``space``'s field.

    rho_1F = |a><a|/2, rho_2F = |-a><-a|/2, rho_3F = (f e^{2|a|^2}/2)|a><-a|,
    rho_4F = rho_3F^dagger.
    """
    fs = space.field_only()
    a = complex(alpha_t(sol, t))
    plus = coherent_state(fs, a).amplitudes
    minus = coherent_state(fs, -a).amplitudes
    c = 0.5 * _coherence_ratio(sol, t)
    r1 = 0.5 * np.outer(plus, plus.conj())
    r2 = 0.5 * np.outer(minus, minus.conj())
    r3 = c * np.outer(plus, minus.conj())
    return r1, r2, r3, r3.conj().T


def assemble(blocks, space: TruncatedSpace) -> DensityMatrix:
    """rho_AF in the bare atom basis from the four |+-> field blocks."""
    r1, r2, r3, r4 = blocks
    pp = np.outer(PLUS, PLUS)
    mm = np.outer(MINUS, MINUS)
    pm = np.outer(PLUS, MINUS)
    mp = np.outer(MINUS, PLUS)
    rho = np.kron(pp, r1) + np.kron(mm, r2) + np.kron(pm, r3) + np.kron(mp, r4)
    sp = space.with_atom(2)
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(sp, rho, validate=False)


def joint_density(sol: AnalyticSolution, t: float, space: TruncatedSpace) -> DensityMatrix:
    return assemble(joint_state(sol, t, space), space)


def cat_state(alpha: complex, space: TruncatedSpace) -> StateVector:
    """(|+>|alpha> + |->|-alpha>)/sqrt(2) in the bare atom basis."""
    fs = space.field_only()
    plus = coherent_state(fs, alpha).amplitudes
    minus = coherent_state(fs, -alpha).amplitudes
    v = (np.kron(PLUS, plus) + np.kron(MINUS, minus)) / math.sqrt(2.0)
    return StateVector(space.with_atom(2), v)


def short_time_cat(sol: AnalyticSolution, t: float, space: TruncatedSpace) -> StateVector:
    """Joint cat state with alpha~ = i g t / 2."""
    return cat_state(0.5j * sol.g_eff * t, space)


def even_odd_cat(alpha: complex, branch: int, space: TruncatedSpace) -> StateVector:
    """(|alpha> +- |-alpha>) normalised; branch 1 even, branch 2 odd."""
    fs = space.field_only()
    sign = 1.0 if branch == 1 else -1.0
    plus = coherent_state(fs, alpha).amplitudes
    minus = coherent_state(fs, -alpha).amplitudes
    v = plus + sign * minus
    return StateVector(fs, v / np.linalg.norm(v))


def conditional_cat_state(sol: AnalyticSolution, t: float, branch: int,
                          space: TruncatedSpace) -> StateVector:
    """Field cat left by detecting the atom in |branch> at short times."""
    if branch not in BRANCHES:
        raise ValueError(f"branch must be 1 or 2, got {branch}")
    return even_odd_cat(0.5j * sol.g_eff * t, branch, space)


def characteristic_blocks(sol: AnalyticSolution, t: float, beta):
    """chi_i(beta) = Tr[rho_iF D(beta)] for i = 1..4 in closed form."""
    beta = np.asarray(beta, dtype=complex)
    a = complex(alpha_t(sol, t))
    g = np.exp(-0.5 * np.abs(beta) ** 2)
    f = float(f_t(sol, t))
    x12 = beta * np.conj(a) - np.conj(beta) * a
    x34 = beta * np.conj(a) + np.conj(beta) * a
    return (0.5 * g * np.exp(x12), 0.5 * g * np.exp(-x12),
            0.5 * f * g * np.exp(-x34), 0.5 * f * g * np.exp(x34))
