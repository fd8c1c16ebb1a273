"""Numerical propagation: dense Lindblad integration and Monte Carlo wave
function trajectories.

Both integrators use fixed-step RK4.  Hamiltonians may be a static matrix
(``FieldOperator`` or array), a ``PeriodicHamiltonian`` or any callable
``t -> matrix``.

Trajectories draw one uniform number per step from their own stream, seeded
from ``(master_seed, trajectory_index)``, and are propagated in fixed batches
of columns.  Results therefore depend only on the configuration, not on how
many workers run the batches or in which order.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .analytic import pdf_moments_q
from .errors import DeltaPTooLarge, DimensionMismatch, NegligibleBranch, StepTooLarge
from .fock import DensityMatrix, FieldOperator, StateVector, TruncatedSpace
from .models import PeriodicHamiltonian
from .observables import batched_entropy

PAPER_RULE = "paper-first-order"
EXACT_RULE = "norm-exact"
COLUMNS = ("mean_photon", "p1", "p2", "p3", "inversion", "entropy", "q", "norm_drift")

MAX_JUMP_PROBABILITY = 0.1
MAX_TRACE_STEP = 1e-6


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_max: float
    record_stride: int = 1
    method: str = "rk4"

    def __post_init__(self):
        if self.dt <= 0 or self.t_max < 0:
            raise ValueError("dt must be positive and t_max non-negative")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.method != "rk4":
            raise ValueError("only the fixed-step rk4 method is available")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    def record_steps(self) -> np.ndarray:
        steps = np.arange(0, self.n_steps + 1, self.record_stride)
        if steps[-1] != self.n_steps:
            steps = np.append(steps, self.n_steps)
        return steps


@dataclass(frozen=True)
class TrajectoryConfig:
    dt: float
    t_max: float
    n_traj: int = 20
    master_seed: int = 0
    record_stride: int = 1
    jump_rule: str = PAPER_RULE
    batch_size: int = 64
    workers: int = 1

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.jump_rule not in (PAPER_RULE, EXACT_RULE):
            raise ValueError(f"unknown jump rule {self.jump_rule!r}")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.batch_size < 1 or self.workers < 1:
            raise ValueError("batch_size and workers must be >= 1")

    @property
    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(self.dt, self.t_max, self.record_stride)


@dataclass
class ObservableSeries:
    times: np.ndarray
    columns: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray] | None = None
    n_traj: int = 1

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        for name, col in self.columns.items():
            if len(col) != len(self.times):
                raise ValueError(f"column {name!r} has {len(col)} rows for {len(self.times)} times")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def header(self) -> list[str]:
        names = ["time", *self.columns]
        if self.stderr:
            names += [f"{c}_stderr" for c in self.columns if c in self.stderr]
        return names

    def rows(self):
        cols = [self.times, *self.columns.values()]
        if self.stderr:
            cols += [self.stderr[c] for c in self.columns if c in self.stderr]
        return np.column_stack(cols)

    def to_csv(self, path, precision: int = 12):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for row in self.rows():
                w.writerow([f"{x:.{precision}g}" for x in row])


@dataclass
class LindbladResult:
    series: ObservableSeries
    final: DensityMatrix
    min_eigenvalue: float
    states: list[np.ndarray] | None = None


@dataclass
class TrajectoryResult:
    series: ObservableSeries
    final_state: StateVector
    jump_times: np.ndarray


@dataclass
class EnsembleResult:
    series: ObservableSeries
    jump_times: list[np.ndarray]
    final_states: np.ndarray = field(repr=False)

    @property
    def jump_counts(self) -> np.ndarray:
        return np.array([len(j) for j in self.jump_times])

    def jump_rate(self, t_from: float, t_to: float) -> tuple[float, float]:
        """Mean jumps per unit time in [t_from, t_to) and its standard error."""
        counts = np.array([np.count_nonzero((j >= t_from) & (j < t_to)) for j in self.jump_times])
        span = t_to - t_from
        se = counts.std(ddof=1) / math.sqrt(len(counts)) if len(counts) > 1 else float("nan")
        return counts.mean() / span, se / span


# --- generators ---------------------------------------------------------------

class _Generator:
    """Non-Hermitian effective Hamiltonian H(t) - (i/2) sum C^dag C."""

    def __init__(self, hamiltonian, collapse_ops: Sequence[np.ndarray], dim: int):
        damp = np.zeros((dim, dim), dtype=complex)
        for c in collapse_ops:
            damp += c.conj().T @ c
        self.damping = damp
        self.periodic = None
        self.callable = None
        if isinstance(hamiltonian, PeriodicHamiltonian):
            self.periodic = hamiltonian
            self.frequency = hamiltonian.frequency
            st = hamiltonian.static - 0.5j * damp
            rs = hamiltonian.raising
            self.stack = np.vstack([st, rs, rs.conj().T])
            self.bound = hamiltonian.norm_bound()
        elif callable(hamiltonian) and not isinstance(hamiltonian, (np.ndarray, FieldOperator)):
            self.callable = hamiltonian
            self.bound = float(np.linalg.norm(np.asarray(hamiltonian(0.0)), 2))
        else:
            h = hamiltonian.matrix if isinstance(hamiltonian, FieldOperator) else np.asarray(hamiltonian, complex)
            if h.shape != (dim, dim):
                raise DimensionMismatch(f"Hamiltonian {h.shape} for dim {dim}")
            self.static = h - 0.5j * damp
            self.bound = float(np.linalg.norm(h, 2))
        self.dim = dim

    def apply(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.periodic is not None:
            d = self.dim
            r = self.stack @ x
            e = np.exp(1j * self.frequency * t)
            return r[:d] + e * r[d:2 * d] + np.conj(e) * r[2 * d:]
        if self.callable is not None:
            return (np.asarray(self.callable(t), complex) - 0.5j * self.damping) @ x
        return self.static @ x

    def rk4(self, t: float, x: np.ndarray, dt: float) -> np.ndarray:
        k1 = -1j * self.apply(t, x)
        k2 = -1j * self.apply(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = -1j * self.apply(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = -1j * self.apply(t + dt, x + dt * k3)
        return x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def step_map(self, dt: float):
        """The RK4 step as a matrix-valued function of t, or None for a generic callable.

        For H = S + e R + conj(e) R^dag with e = exp(i w t) the step matrix is a
        trigonometric polynomial of degree 4 in w t, so 9 phase samples fix it exactly.
        """
        eye = np.eye(self.dim, dtype=complex)
        if self.callable is not None:
            return None
        if self.periodic is None:
            m = self.rk4(0.0, eye, dt)
            return lambda t: m
        w = self.frequency
        harmonics = np.arange(-4, 5)
        theta = 2 * np.pi * np.arange(9) / 9
        samples = np.stack([self.rk4(th / w, eye, dt) for th in theta])
        coeffs = np.einsum("jm,jab->mab", np.exp(-1j * np.outer(theta, harmonics)), samples) / 9
        flat = coeffs.reshape(9, -1)
        shape = (self.dim, self.dim)
        return lambda t: (np.exp(1j * w * t * harmonics) @ flat).reshape(shape)


def _check_step(gen: _Generator, dt: float):
    bound = gen.bound + 0.5 * float(np.linalg.norm(gen.damping, 2))
    if dt * bound > 0.1:
        raise StepTooLarge(f"dt * ||H_eff|| = {dt * bound:.3g} exceeds 0.1")


def _collapse_arrays(collapse_ops, dim) -> list[np.ndarray]:
    out = []
    for c in collapse_ops or ():
        m = c.matrix if isinstance(c, FieldOperator) else np.asarray(c, complex)
        if m.shape != (dim, dim):
            raise DimensionMismatch(f"collapse operator {m.shape} for dim {dim}")
        out.append(m)
    return out


def _record_columns(space: TruncatedSpace, pdf: np.ndarray, pops: np.ndarray, atom: np.ndarray):
    """Column values from photon pdf(s), populations and reduced atom matrices."""
    n = np.arange(space.fock_dim)
    pops3 = np.zeros(pops.shape[:-1] + (3,))
    pops3[..., : pops.shape[-1]] = pops
    if space.atom_dim > 1:
        entropy = batched_entropy(atom)
    else:
        entropy = np.zeros(pops.shape[:-1])
    return {
        "mean_photon": pdf @ n,
        "p1": pops3[..., 0],
        "p2": pops3[..., 1],
        "p3": pops3[..., 2],
        "inversion": pops3[..., 0] - pops3[..., 1],
        "entropy": entropy,
        "q": pdf_moments_q(pdf),
    }


# --- Lindblad -----------------------------------------------------------------

def lindblad_evolve(hamiltonian, collapse_ops, rho0: DensityMatrix, cfg: IntegratorConfig,
                    keep_states: bool = False) -> LindbladResult:
    """Integrate drho/dt = -i[H, rho] + sum_k (C rho C^dag - {C^dag C, rho}/2)."""
    space = rho0.space
    dim = space.dim
    collapse = _collapse_arrays(collapse_ops, dim)
    gen = _Generator(hamiltonian, collapse, dim)
    _check_step(gen, cfg.dt)

    def rhs(t, rho):
        y = gen.apply(t, rho)
        out = -1j * (y - y.conj().T)
        for c in collapse:
            out += c @ rho @ c.conj().T
        return out

    rec = cfg.record_steps()
    n_rec = len(rec)
    pdfs = np.empty((n_rec, space.fock_dim))
    pops = np.empty((n_rec, space.atom_dim))
    atoms = np.empty((n_rec, space.atom_dim, space.atom_dim), dtype=complex)
    drift = np.empty(n_rec)
    states = [] if keep_states else None
    min_eig = math.inf

    rho = rho0.matrix.copy()
    dt = cfg.dt
    j = 0
    prev_trace = np.trace(rho).real
    for k in range(cfg.n_steps + 1):
        if j < n_rec and k == rec[j]:
            d = np.diagonal(rho).real.reshape(space.atom_dim, space.fock_dim)
            pdfs[j] = d.sum(axis=0)
            pops[j] = d.sum(axis=1)
            r4 = rho.reshape(space.atom_dim, space.fock_dim, space.atom_dim, space.fock_dim)
            atoms[j] = np.einsum("injn->ij", r4)
            drift[j] = abs(np.trace(rho).real - 1.0)
            min_eig = min(min_eig, float(np.linalg.eigvalsh(rho)[0]))
            if keep_states:
                states.append(rho.copy())
            j += 1
        if k == cfg.n_steps:
            break
        t = k * dt
        k1 = rhs(t, rho)
        k2 = rhs(t + 0.5 * dt, rho + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, rho + 0.5 * dt * k2)
        k4 = rhs(t + dt, rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho).real
        if abs(tr - prev_trace) > MAX_TRACE_STEP:
            raise StepTooLarge(f"trace changed by {abs(tr - prev_trace):.3g} in one step at t={t:.6g}")
        prev_trace = tr

    cols = _record_columns(space, pdfs / pdfs.sum(axis=1, keepdims=True), pops, atoms)
    cols["norm_drift"] = drift
    series = ObservableSeries(rec * dt, cols)
    final = DensityMatrix(space, rho, validate=False)
    return LindbladResult(series, final, min_eig, states)


def lindblad_rhs(hamiltonian, collapse_ops, rho: np.ndarray, t: float = 0.0) -> np.ndarray:
    """Right-hand side of the master equation for a single density matrix."""
    dim = rho.shape[0]
    collapse = _collapse_arrays(collapse_ops, dim)
    gen = _Generator(hamiltonian, collapse, dim)
    y = gen.apply(t, rho)
    out = -1j * (y - y.conj().T)
    for c in collapse:
        out = out + c @ rho @ c.conj().T
    return out


# --- trajectories -------------------------------------------------------------

def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index``; order-independent by construction."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(index,))))


_CHUNK = 4096


@dataclass
class _BatchOut:
    pdfs: np.ndarray       # (n_rec, B, F)
    pops: np.ndarray       # (n_rec, B, A)
    atoms: np.ndarray      # (n_rec, B, A, A)
    drift: np.ndarray      # (n_rec, B)
    final: np.ndarray      # (dim, B)
    jumps: list


def _run_batch(hamiltonian, collapse, psi0: np.ndarray, space: TruncatedSpace,
               cfg: TrajectoryConfig, indices: Sequence[int]) -> _BatchOut:
    dim = space.dim
    c_ops = _collapse_arrays([collapse] if collapse is not None else [], dim)
    gen = _Generator(hamiltonian, c_ops, dim)
    c_op = c_ops[0] if c_ops else None
    dt = cfg.dt
    _check_step(gen, dt)
    step = gen.step_map(dt)
    b = len(indices)
    rngs = [trajectory_rng(cfg.master_seed, i) for i in indices]
    n_steps = cfg.integrator.n_steps
    rec = cfg.integrator.record_steps()
    n_rec = len(rec)
    af = (space.atom_dim, space.fock_dim)

    pdfs = np.empty((n_rec, b, space.fock_dim))
    pops = np.empty((n_rec, b, space.atom_dim))
    atoms = np.empty((n_rec, b, space.atom_dim, space.atom_dim), dtype=complex)
    drift = np.empty((n_rec, b))
    jumps = [[] for _ in range(b)]
    drift_acc = np.zeros(b)

    psi = np.repeat(np.asarray(psi0, complex).reshape(dim, 1), b, axis=1)
    draws = None
    exact = cfg.jump_rule == EXACT_RULE
    cols = np.arange(b)
    j = 0
    for k in range(n_steps + 1):
        if j < n_rec and k == rec[j]:
            v = psi.T.reshape(b, *af)
            prob = np.abs(v) ** 2
            pdfs[j] = prob.sum(axis=1)
            pops[j] = prob.sum(axis=2)
            atoms[j] = np.einsum("bin,bjn->bij", v, v.conj())
            drift[j] = drift_acc
            j += 1
        if k == n_steps:
            break
        if k % _CHUNK == 0:
            m = min(_CHUNK, n_steps - k)
            draws = np.stack([g.random(m) for g in rngs], axis=1)
        r = draws[k % _CHUNK]
        t = k * dt

        drifted = gen.rk4(t, psi, dt) if step is None else step(t) @ psi
        norm2 = np.einsum("ib,ib->b", drifted.conj(), drifted).real

        if c_op is None:
            drift_acc += np.abs(norm2 - 1.0)
            psi = drifted / np.sqrt(norm2)
            continue

        cpsi = c_op @ psi
        w = np.einsum("ib,ib->b", cpsi.conj(), cpsi).real
        dp_first = dt * w
        if dp_first.max() > MAX_JUMP_PROBABILITY:
            raise DeltaPTooLarge(f"jump probability {dp_first.max():.3g} at t={t:.6g}")
        dp = 1.0 - norm2 if exact else dp_first
        jump = dp > r
        drift_acc += np.abs(norm2 - (1.0 - dp_first))
        psi = drifted / np.sqrt(norm2)
        if jump.any():
            jc = cols[jump]
            if exact:
                # jump at the end of the step so no evolution time is lost
                cj = c_op @ drifted[:, jc]
                psi[:, jc] = cj / np.linalg.norm(cj, axis=0)
            else:
                psi[:, jc] = cpsi[:, jc] / np.sqrt(w[jc])
            t_jump = t + dt if exact else t
            for col in jc:
                jumps[col].append(t_jump)
    return _BatchOut(pdfs, pops, atoms, drift, psi, [np.array(x) for x in jumps])


def _batch_task(args):
    return _run_batch(*args)


def _run_all(hamiltonian, collapse, psi0, space, cfg: TrajectoryConfig) -> list[_BatchOut]:
    idx = list(range(cfg.n_traj))
    batches = [idx[i:i + cfg.batch_size] for i in range(0, cfg.n_traj, cfg.batch_size)]
    tasks = [(hamiltonian, collapse, psi0, space, cfg, bi) for bi in batches]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_batch_task, tasks))
    return [_batch_task(t) for t in tasks]


def _initial_vector(psi0, space):
    if isinstance(psi0, StateVector):
        if psi0.space != space:
            raise DimensionMismatch("initial state does not live on the Hamiltonian's space")
        return psi0.amplitudes
    return np.asarray(psi0, complex)


def _operator_space(hamiltonian, psi0) -> TruncatedSpace:
    if isinstance(psi0, StateVector):
        return psi0.space
    if isinstance(hamiltonian, (PeriodicHamiltonian, FieldOperator)):
        return hamiltonian.space
    raise TypeError("pass psi0 as a StateVector to fix the space")


def mcwf_trajectory(hamiltonian, collapse, psi0: StateVector, cfg: TrajectoryConfig,
                    seed: int | None = None) -> TrajectoryResult:
    """One Monte Carlo wave-function trajectory.

    Per step of length dt the RK4-propagated no-jump state psi~ is kept
    (renormalised) unless the draw falls below the jump probability.
    ``paper-first-order``: dp = dt <C^dag C> and the jump replaces psi by
    C psi / ||C psi|| taken at the start of the step.  ``norm-exact``:
    dp = 1 - ||psi~||^2 and the jump is C psi~ / ||C psi~||, so a jumping
    trajectory does not lose the step's Hamiltonian evolution.  ``norm_drift`` accumulates
    | ||psi~||^2 - (1 - dt <C^dag C>) | over the steps.

    ``seed`` is the trajectory index within ``cfg.master_seed``'s family.
    """
    space = _operator_space(hamiltonian, psi0)
    vec = _initial_vector(psi0, space)
    index = 0 if seed is None else seed
    out = _run_batch(hamiltonian, collapse, vec, space, cfg, [index])
    cols = _record_columns(space, out.pdfs[:, 0], out.pops[:, 0], out.atoms[:, 0])
    cols["norm_drift"] = out.drift[:, 0]
    times = cfg.integrator.record_steps() * cfg.dt
    series = ObservableSeries(times, cols)
    final = StateVector(space, out.final[:, 0])
    return TrajectoryResult(series, final, out.jumps[0])


def _jackknife_se(total: np.ndarray, per_traj: np.ndarray, stat: Callable, n: int) -> np.ndarray:
    """Jackknife standard error of stat(mean) over trajectories (axis 1 of per_traj)."""
    loo = (total[:, None] - per_traj) / (n - 1)
    vals = stat(loo)
    mean = vals.mean(axis=1, keepdims=True)
    return np.sqrt((n - 1) / n * ((vals - mean) ** 2).sum(axis=1))


def mcwf_ensemble(hamiltonian, collapse, psi0: StateVector, cfg: TrajectoryConfig) -> EnsembleResult:
    """Average of ``cfg.n_traj`` trajectories with standard errors.

    Linear columns (photon number, populations, inversion, norm drift) are
    trajectory means with sample-std / sqrt(n) errors.  ``entropy`` and ``q``
    are evaluated on the averaged reduced atom state and photon distribution,
    with jackknife errors.
    """
    space = _operator_space(hamiltonian, psi0)
    vec = _initial_vector(psi0, space)
    outs = _run_all(hamiltonian, collapse, vec, space, cfg)
    pdfs = np.concatenate([o.pdfs for o in outs], axis=1)
    pops = np.concatenate([o.pops for o in outs], axis=1)
    atoms = np.concatenate([o.atoms for o in outs], axis=1)
    drift = np.concatenate([o.drift for o in outs], axis=1)
    finals = np.concatenate([o.final for o in outs], axis=1)
    jumps = [j for o in outs for j in o.jumps]
    n = cfg.n_traj

    per = _record_columns(space, pdfs, pops, atoms)
    per["norm_drift"] = drift
    cols, err = {}, {}
    for name in ("mean_photon", "p1", "p2", "p3", "inversion", "norm_drift"):
        x = per[name]
        cols[name] = x.mean(axis=1)
        err[name] = x.std(axis=1, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(len(x))

    mean_pdf = pdfs.mean(axis=1)
    mean_atom = atoms.mean(axis=1)
    cols["entropy"] = batched_entropy(mean_atom) if space.atom_dim > 1 else np.zeros(len(mean_pdf))
    cols["q"] = pdf_moments_q(mean_pdf)
    if n > 1:
        err["q"] = _jackknife_se(pdfs.sum(axis=1), pdfs, pdf_moments_q, n)
        if space.atom_dim > 1:
            err["entropy"] = _jackknife_se(atoms.sum(axis=1), atoms, batched_entropy, n)
        else:
            err["entropy"] = np.zeros(len(mean_pdf))
    else:
        err["q"] = np.zeros(len(mean_pdf))
        err["entropy"] = np.zeros(len(mean_pdf))
    order = {c: cols[c] for c in COLUMNS}
    series = ObservableSeries(cfg.integrator.record_steps() * cfg.dt, order,
                              {c: err[c] for c in COLUMNS}, n_traj=n)
    return EnsembleResult(series, jumps, finals)


# --- post-processing ----------------------------------------------------------

def conditional_field_state(state, level: int, field_rotation: float = 0.0):
    """Project the atom onto ``|level>``, trace it out and renormalise.

    ``field_rotation`` applies exp(i theta a^dag a) to the field afterwards
    (used to move out of a frame rotating with the free photon term).
    Returns ``(DensityMatrix, probability)``.
    """
    if isinstance(state, StateVector):
        space = state.space
        v = state.amplitudes.reshape(space.atom_dim, space.fock_dim)[level - 1]
        prob = float(np.vdot(v, v).real)
        block = np.outer(v, v.conj())
    elif isinstance(state, DensityMatrix):
        space = state.space
        r4 = state.matrix.reshape(space.atom_dim, space.fock_dim, space.atom_dim, space.fock_dim)
        block = r4[level - 1, :, level - 1, :]
        prob = float(np.trace(block).real)
    else:
        raise TypeError("state must be a StateVector or DensityMatrix")
    if space.atom_dim < 2:
        raise DimensionMismatch("conditional_field_state needs an atom factor")
    if prob < 1e-10:
        raise NegligibleBranch(f"branch |{level}> has probability {prob:.3g}")
    if field_rotation:
        ph = np.exp(1j * field_rotation * np.arange(space.fock_dim))
        block = ph[:, None] * block * ph.conj()[None, :]
    rho = block / prob
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(space.field_only(), rho), prob


def envelope(values: np.ndarray, times: np.ndarray, window: float) -> tuple[np.ndarray, np.ndarray]:
    """Sliding-window (lower, upper) envelope over a centred window of length ``window``."""
    values = np.asarray(values, float)
    step = float(np.median(np.diff(times)))
    size = max(1, int(round(window / step)) | 1)
    lo = minimum_filter1d(values, size, mode="nearest")
    hi = maximum_filter1d(values, size, mode="nearest")
    return lo, hi


def drive_period(omega_eff: float) -> float:
    """One period of the population oscillation driven at omega_eff, 2 pi / (2 omega_eff)."""
    return math.pi / omega_eff
