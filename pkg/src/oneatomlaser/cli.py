"""Command-line runner for the figure scenarios and the validation suite.

    oneatomlaser run --config run.cfg [--scenario fig5] [--out out/] [--seed 7]
                     [--trajectories 20] [--dt 0.01] [--tmax 7160]
    oneatomlaser validate --config run.cfg

The config file is flat ``key = value`` text; ``#`` starts a comment.
Exit codes: 0 success, 1 usage or config error, 2 validation failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from . import analytic as an
from .dynamics import (
    IntegratorConfig, ObservableSeries, TrajectoryConfig, conditional_field_state, drive_period,
    envelope, lindblad_evolve, mcwf_ensemble, mcwf_trajectory,
)
from .errors import ConfigError
from .fock import TruncatedSpace, annihilation_op, coherent_amplitudes, fock_dim_for, fock_state, wigner
from .models import (
    FINAL, EffectiveParams, LambdaParams, build_effective_hamiltonian, check_validity,
    effective_params, full_hamiltonian, overall_status, second_order_params,
)

SCENARIOS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "validate")
FULL_SCENARIOS = ("fig5", "fig6", "fig7")

FLOAT_KEYS = ("delta_prime", "g", "omega", "omega1p", "omega2p", "kappa", "dt", "t_max",
              "wigner_extent")
INT_KEYS = ("n_traj", "master_seed", "fock_dim", "wigner_points", "workers")
STR_KEYS = ("scenario",)
LAMBDA_KEYS = ("delta_prime", "g", "omega", "omega1p", "omega2p")

FIG2_NSS = (1.0, 2.0, 5.0, 10.0)
FIG3_NSS = (0.25, 1.0, 5.0, 10.0, 20.0)
FIG4_NSS = (0.25, 0.5, 1.0, 5.0, 20.0)
VALIDATE_RATIOS = (0.5, 1.0, math.sqrt(5.0))

# tolerances echoed in every summary
TOL = {
    "analytic_vs_lindblad": 1e-5,
    "steady_state_photon": 1e-4,
    "full_photon_rel": 0.05,
    "full_envelope": 0.05,
    "full_p3": 1e-2,
    "cat_fidelity": 0.98,
    "wigner_negativity": -0.05,
    "dissipative_photon_band": (0.85, 1.15),
    "dissipative_population": 0.07,
    "q_final": 0.02,
}


@dataclass
class ScenarioConfig:
    scenario: str
    values: dict
    out: Path = Path("out")
    wigner_extent: float = 4.0
    wigner_points: int = 161
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if self.scenario in FULL_SCENARIOS:
            missing = [k for k in LAMBDA_KEYS if k not in self.values]
            if missing:
                raise ConfigError(f"{self.scenario} needs {', '.join(missing)}")
            kappa = self.values.get("kappa", 0.0)
            if self.scenario in ("fig5", "fig6") and kappa != 0:
                raise ConfigError(f"{self.scenario} is the Hamiltonian (kappa = 0) run")
            if self.scenario == "fig7" and kappa <= 0:
                raise ConfigError("fig7 needs kappa > 0")
        if self.wigner_points < 2 or self.wigner_extent <= 0:
            raise ConfigError("wigner grid needs >= 2 points and a positive extent")

    def get(self, key, default=None):
        return self.values.get(key, default)

    def lambda_params(self) -> LambdaParams:
        try:
            return LambdaParams(*(self.values[k] for k in LAMBDA_KEYS), kappa=self.get("kappa", 0.0))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def master_seed(self) -> int:
        return int(self.get("master_seed", 0))


def parse_config(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            if key in FLOAT_KEYS:
                values[key] = float(val)
            elif key in INT_KEYS:
                values[key] = int(val)
            elif key in STR_KEYS:
                values[key] = val
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from exc
    return values


def load_config(path, overrides: dict | None = None, out=None) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    values = parse_config(text)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if values.get("master_seed", 0) < 0 or values.get("master_seed", 0) >= 2 ** 64:
        raise ConfigError("master_seed must be an unsigned 64-bit integer")
    scenario = values.pop("scenario", None)
    if scenario is None:
        raise ConfigError("no scenario given (config key or --scenario)")
    extras = {k: values.pop(k) for k in ("wigner_extent", "wigner_points", "workers") if k in values}
    return ScenarioConfig(scenario, values, Path(out) if out else Path("out"), **extras)


# --- helpers --------------------------------------------------------------------

def _check(name, value, tolerance, passed) -> dict:
    return {"name": name, "value": float(value), "tolerance": tolerance, "passed": bool(passed)}


def _landmarks(sol: an.AnalyticSolution) -> dict:
    if sol.kappa == 0:
        return {"t_F": None, "gamma_D": None, "gamma_prime_D": None}
    g_d, g_pd = an.decoherence_rates(sol)
    return {"t_F": an.inflection_time(sol), "gamma_D": g_d, "gamma_prime_D": g_pd}


def _effective_block(e: EffectiveParams) -> dict:
    sol = an.AnalyticSolution(e.g_eff, e.kappa)
    n_ss = e.mean_photon_ss if e.kappa > 0 else None
    return {"g_eff": e.g_eff, "omega_eff": e.omega_eff, "kappa": e.kappa,
            "mean_photon_ss": n_ss, **_landmarks(sol)}


def _tag(n_ss: float) -> str:
    return f"nss{n_ss:g}"


def _write_series(path: Path, times, columns: dict, precision: int = 12):
    ObservableSeries(np.asarray(times), columns).to_csv(path, precision)


def write_wigner(path: Path, xvec, yvec, w: np.ndarray, precision: int = 10):
    """Matrix CSV: first row holds x, first column holds y."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["y\\x", *(f"{x:.{precision}g}" for x in xvec)])
        for y, row in zip(yvec, w):
            out.writerow([f"{y:.{precision}g}", *(f"{v:.{precision}g}" for v in row)])


def _analytic_grid(cfg: ScenarioConfig):
    kappa = cfg.get("kappa", 1.0)
    if kappa <= 0:
        raise ConfigError("analytic scenarios need kappa > 0")
    t_max = cfg.get("t_max", 10.0 / kappa)
    dt = cfg.get("dt", 0.01 / kappa)
    n = int(round(t_max / dt))
    return kappa, np.linspace(0.0, n * dt, n + 1)


# --- analytic figures -------------------------------------------------------

def run_fig2(cfg: ScenarioConfig):
    kappa, times = _analytic_grid(cfg)
    cols, checks, eff = {}, [], {}
    for n_ss in FIG2_NSS:
        sol = an.AnalyticSolution.from_mean_photon(n_ss, kappa)
        q1 = an.mandel_q(sol, times, 1)
        q2 = an.mandel_q(sol, times, 2)
        cols[f"q1_{_tag(n_ss)}"] = q1
        cols[f"q2_{_tag(n_ss)}"] = q2
        eff[_tag(n_ss)] = _effective_block(EffectiveParams(sol.g_eff, 0.0, kappa))
        transient = (times > 0) & (an.f_t(sol, times) >= 1e-6)
        checks.append(_check(f"q1>0 transient {_tag(n_ss)}", q1[transient].min(), 0.0,
                             q1[transient].min() > 0))
        checks.append(_check(f"q2<0 transient {_tag(n_ss)}", q2[transient].max(), 0.0,
                             q2[transient].max() < 0))
        end = max(abs(q1[-1]), abs(q2[-1]))
        checks.append(_check(f"|q| at end {_tag(n_ss)}", end, TOL["q_final"], end < TOL["q_final"]))
    return times, cols, eff, checks


def run_fig3(cfg: ScenarioConfig):
    kappa, times = _analytic_grid(cfg)
    cols, eff = {}, {}
    for n_ss in FIG3_NSS:
        sol = an.AnalyticSolution.from_mean_photon(n_ss, kappa)
        # figure curve in the short-time form, plus the exact-f curve
        cols[f"entropy_{_tag(n_ss)}"] = np.asarray(an.entanglement_entropy(sol, times, short_time=True))
        cols[f"entropy_exact_{_tag(n_ss)}"] = np.asarray(an.entanglement_entropy(sol, times))
        eff[_tag(n_ss)] = _effective_block(EffectiveParams(sol.g_eff, 0.0, kappa))
    return times, cols, eff, []


def run_fig4(cfg: ScenarioConfig):
    kappa, times = _analytic_grid(cfg)
    cols, eff = {}, {}
    for n_ss in FIG4_NSS:
        sol = an.AnalyticSolution.from_mean_photon(n_ss, kappa)
        cols[f"inversion_{_tag(n_ss)}"] = np.asarray(an.f_t(sol, times))
        eff[_tag(n_ss)] = _effective_block(EffectiveParams(sol.g_eff, 0.0, kappa))
    return times, cols, eff, []


# --- full three-level model ---------------------------------------------------

def _full_space(cfg: ScenarioConfig, p: LambdaParams, t_max: float) -> TruncatedSpace:
    if "fock_dim" in cfg.values:
        return TruncatedSpace(int(cfg.get("fock_dim")), 3)
    e = effective_params(p)
    if p.kappa > 0:
        alpha = (e.g_eff / p.kappa) * (1.0 - math.exp(-0.5 * p.kappa * t_max))
    else:
        alpha = 0.5 * e.g_eff * t_max
    return TruncatedSpace(fock_dim_for(alpha), 3)


def _record_stride(dt: float, every: float = 1.0) -> int:
    return max(1, int(round(every / dt)))


def hamiltonian_run(cfg: ScenarioConfig):
    """Pure-state kappa = 0 propagation of the full model from |1>|0>."""
    p = cfg.lambda_params()
    t_max = cfg.get("t_max", 7160.0)
    dt = cfg.get("dt", 0.01)
    space = _full_space(cfg, p, t_max)
    tcfg = TrajectoryConfig(dt, t_max, n_traj=1, master_seed=cfg.master_seed,
                            record_stride=_record_stride(dt))
    res = mcwf_trajectory(full_hamiltonian(p, space), None, fock_state(space, 0, 1), tcfg)
    return p, space, res


def envelope_deviation(times, p1, p2, f_theory, window: float):
    """Largest distance between the sliding envelopes of p1, p2 and (1 +- f)/2,
    ignoring half a window at either end."""
    inner = (times >= times[0] + window / 2) & (times <= times[-1] - window / 2)
    if not inner.any():  # run shorter than one window
        inner = np.ones_like(times, dtype=bool)
    hi_th, lo_th = 0.5 * (1 + f_theory), 0.5 * (1 - f_theory)
    worst = 0.0
    for p in (p1, p2):
        lo, hi = envelope(p, times, window)
        worst = max(worst, np.abs(hi - hi_th)[inner].max(), np.abs(lo - lo_th)[inner].max())
    return float(worst)


def run_fig5(cfg: ScenarioConfig, run=None):
    p, space, res = run or hamiltonian_run(cfg)
    s = res.series
    t = s.times
    e = effective_params(p)
    f_th = np.exp(-0.5 * e.g_eff ** 2 * t ** 2)
    window = drive_period(second_order_params(p).omega_eff)
    cols = dict(s.columns)
    cols["mean_photon_theory"] = 0.25 * e.g_eff ** 2 * t ** 2
    cols["p1_theory"] = 0.5 * (1 + f_th)
    cols["p2_theory"] = 0.5 * (1 - f_th)
    for name in ("p1", "p2"):
        lo, hi = envelope(s[name], t, window)
        cols[f"{name}_env_lo"] = lo
        cols[f"{name}_env_hi"] = hi

    n_end, n_th = s["mean_photon"][-1], cols["mean_photon_theory"][-1]
    rel = abs(n_end - n_th) / n_th if n_th > 0 else math.inf
    dev = envelope_deviation(t, s["p1"], s["p2"], f_th, window)
    p3 = float(s["p3"].max())
    checks = [
        _check("mean photon relative error at t_max", rel, TOL["full_photon_rel"], rel < TOL["full_photon_rel"]),
        _check("population envelope deviation", dev, TOL["full_envelope"], dev < TOL["full_envelope"]),
        _check("max p3", p3, TOL["full_p3"], p3 < TOL["full_p3"]),
    ]
    extra = {"envelope_window": window, "fock_dim": space.fock_dim,
             "mean_photon_end": float(n_end), "mean_photon_theory_end": float(n_th),
             "second_order_mean_photon_end": 0.25 * (second_order_params(p).g_eff * t[-1]) ** 2}
    return t, cols, extra, checks


def branch_field(state, level: int, p: LambdaParams, t: float):
    """Field state conditioned on the atom in ``level``, taken out of the frame
    rotating with the free photon term -(1 - delta') a^dag a."""
    theta = -math.fmod(p.drive_frequency * t, 2 * math.pi)
    return conditional_field_state(state, level, field_rotation=theta)


def best_cat_fidelity(rho) -> tuple[float, complex, float]:
    """max over (alpha, phi) of <cat|rho|cat>, cat ~ |alpha> + e^{i phi} |-alpha>."""
    fs = rho.space

    def neg(x):
        alpha = x[0] * np.exp(1j * x[1])
        cat = coherent_amplitudes(alpha, fs.fock_dim) + np.exp(1j * x[2]) * coherent_amplitudes(-alpha, fs.fock_dim)
        nrm = np.vdot(cat, cat).real
        if nrm < 1e-12:
            return 0.0
        return -float(np.vdot(cat, rho.matrix @ cat).real / nrm)

    n = float(np.real(np.trace(rho.matrix @ np.diag(np.arange(fs.fock_dim)))))
    starts = [(math.sqrt(max(n, 1e-3)), th, ph) for th in np.linspace(0, math.pi, 7)
              for ph in np.linspace(0, 2 * math.pi, 6, endpoint=False)]
    best = min((minimize(neg, s0, method="Nelder-Mead", options={"xatol": 1e-6, "fatol": 1e-10})
                for s0 in starts), key=lambda o: o.fun)
    r, th, ph = best.x
    return -float(best.fun), complex(r * np.exp(1j * th)), float(ph % (2 * math.pi))


def run_fig6(cfg: ScenarioConfig, run=None):
    p, space, res = run or hamiltonian_run(cfg)
    t_end = float(res.series.times[-1])
    e = effective_params(p)
    ext, npts = cfg.wigner_extent, cfg.wigner_points
    grid = np.linspace(-ext, ext, npts)
    out = {}
    info = {"t": t_end, "fock_dim": space.fock_dim}
    for level in (1, 2):
        rho, prob = branch_field(res.final_state, level, p, t_end)
        out[level] = (rho, wigner(rho, grid, grid))
        info[f"branch{level}_probability"] = prob
    alpha = 1j * e.g_eff * t_end / 2
    target = an.even_odd_cat(alpha, 1, space.field_only())
    fid = out[1][0].fidelity(target)
    best, best_alpha, best_phase = best_cat_fidelity(out[1][0])
    w_min2 = float(out[2][1].min())
    info.update({"alpha_target": [alpha.real, alpha.imag], "best_cat_fidelity": best,
                 "best_cat_alpha": [best_alpha.real, best_alpha.imag], "best_cat_phase": best_phase,
                 "wigner_min_branch1": float(out[1][1].min()), "wigner_min_branch2": w_min2})
    checks = [
        _check("even-cat fidelity, branch 1", fid, TOL["cat_fidelity"], fid > TOL["cat_fidelity"]),
        _check("wigner minimum, branch 2", w_min2, TOL["wigner_negativity"], w_min2 < TOL["wigner_negativity"]),
    ]
    return grid, out, info, checks


def dissipative_run(cfg: ScenarioConfig):
    p = cfg.lambda_params()
    e = effective_params(p)
    t_max = cfg.get("t_max", 12.0 / p.kappa)
    dt = cfg.get("dt", 0.01)
    space = _full_space(cfg, p, t_max)
    tcfg = TrajectoryConfig(dt, t_max, n_traj=int(cfg.get("n_traj", 20)), master_seed=cfg.master_seed,
                            record_stride=_record_stride(dt), batch_size=64, workers=cfg.workers)
    c = math.sqrt(p.kappa) * annihilation_op(space).matrix
    res = mcwf_ensemble(full_hamiltonian(p, space), c, fock_state(space, 0, 1), tcfg)
    return p, e, space, tcfg, res


def run_fig7(cfg: ScenarioConfig):
    p, e, space, tcfg, res = dissipative_run(cfg)
    s = res.series
    t = s.times
    sol = an.AnalyticSolution(e.g_eff, p.kappa)
    f_th = np.asarray(an.f_t(sol, t))
    cols = dict(s.columns)
    cols["mean_photon_theory"] = np.asarray(an.mean_photon(sol, t))
    cols["p1_theory"] = 0.5 * (1 + f_th)
    cols["p2_theory"] = 0.5 * (1 - f_th)
    window = drive_period(second_order_params(p).omega_eff)
    late = t >= t[-1] - 4.0 / p.kappa
    n_late = float(s["mean_photon"][late].mean())
    worst = 0.0
    for name in ("p1", "p2"):
        lo, hi = envelope(s[name], t, window)
        cols[f"{name}_env_lo"] = lo
        cols[f"{name}_env_hi"] = hi
        inner = late & (t <= t[-1] - window / 2)
        if not inner.any():
            inner = late
        worst = max(worst, np.abs(lo[inner] - 0.5).max(), np.abs(hi[inner] - 0.5).max())
    lo_b, hi_b = TOL["dissipative_photon_band"]
    rate, rate_se = res.jump_rate(t[-1] - 4.0 / p.kappa, t[-1] + tcfg.dt)
    checks = [
        _check("late mean photon number", n_late, list(TOL["dissipative_photon_band"]), lo_b <= n_late <= hi_b),
        _check("late population envelope distance from 0.5", worst, TOL["dissipative_population"],
               worst < TOL["dissipative_population"]),
    ]
    extra = {"fock_dim": space.fock_dim, "envelope_window": window, "late_window_kappa_t": 4.0,
             "jump_rate_late": rate, "jump_rate_late_se": rate_se,
             "kappa_mean_photon_late": p.kappa * n_late}
    return t, cols, {k: s.stderr[k] for k in s.columns}, extra, checks


# --- validation -----------------------------------------------------------------

def validate_effective(ratio: float, kappa: float = 1.0, dt_kappa: float = 1e-3, t_kappa: float = 10.0,
                       steady_t_kappa: float = 30.0):
    """Lindblad integration of the effective-final model against the closed forms."""
    g = ratio * kappa
    sol = an.AnalyticSolution(g, kappa)
    space = TruncatedSpace(fock_dim_for(ratio), 2)
    h = build_effective_hamiltonian(EffectiveParams(g, 0.0, kappa), space, FINAL)
    c = math.sqrt(kappa) * annihilation_op(space).matrix
    dt = dt_kappa / kappa
    stride = max(1, int(round(0.1 / dt_kappa)))
    res = lindblad_evolve(h, [c], fock_state(space, 0, 1).density(),
                          IntegratorConfig(dt, steady_t_kappa / kappa, stride))
    s = res.series
    win = s.times <= t_kappa / kappa + 1e-12
    err_n = float(np.abs(s["mean_photon"][win] - an.mean_photon(sol, s.times[win])).max())
    err_i = float(np.abs(s["inversion"][win] - an.f_t(sol, s.times[win])).max())
    err_ss = abs(float(s["mean_photon"][-1]) - ratio ** 2)
    return res, (err_n, err_i, err_ss)


def run_validate(cfg: ScenarioConfig):
    kappa = cfg.get("kappa", 1.0) or 1.0
    checks, rows = [], []
    for ratio in VALIDATE_RATIOS:
        res, (err_n, err_i, err_ss) = validate_effective(ratio, kappa)
        tag = f"g/kappa={ratio:.6g}"
        tol = TOL["analytic_vs_lindblad"]
        checks.append(_check(f"mean photon vs closed form, {tag}", err_n, tol, err_n < tol))
        checks.append(_check(f"inversion vs f(t), {tag}", err_i, tol, err_i < tol))
        checks.append(_check(f"steady mean photon, {tag}", err_ss, TOL["steady_state_photon"],
                             err_ss < TOL["steady_state_photon"]))
        checks.append(_check(f"min eigenvalue, {tag}", res.min_eigenvalue, -1e-6, res.min_eigenvalue > -1e-6))
        rows.append((ratio, err_n, err_i, err_ss))
    return rows, checks


# --- entry point --------------------------------------------------------------

def _summary(cfg: ScenarioConfig, checks: list, **extra) -> dict:
    params = {k: v for k, v in sorted(cfg.values.items())}
    out = {"scenario": cfg.scenario, "parameters": params, "tolerances": TOL,
           "seeds": {"master_seed": cfg.master_seed, "n_traj": cfg.get("n_traj")}}
    if cfg.scenario in FULL_SCENARIOS or all(k in cfg.values for k in LAMBDA_KEYS):
        p = cfg.lambda_params()
        out["effective"] = _effective_block(effective_params(p))
        out["second_order"] = _effective_block(second_order_params(p))
        report = check_validity(p)
        out["validity"] = {k: {"value": c.value, "status": c.status} for k, c in report.items()}
        out["validity_status"] = overall_status(report)
    out.update(extra)
    out["checks"] = checks
    out["passed"] = all(c["passed"] for c in checks)
    return out


def _write_json(path: Path, data: dict):
    path.write_text(json.dumps(data, indent=2, sort_keys=False, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x).__name__}")


def run_scenario(cfg: ScenarioConfig) -> dict:
    """Run one scenario, write its CSV files and ``summary.json`` under ``cfg.out``."""
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    name = cfg.scenario
    if name in ("fig2", "fig3", "fig4"):
        fn = {"fig2": run_fig2, "fig3": run_fig3, "fig4": run_fig4}[name]
        times, cols, eff, checks = fn(cfg)
        _write_series(out / f"{name}.csv", times, cols)
        summary = _summary(cfg, checks, effective_by_mean_photon=eff)
    elif name == "fig5":
        t, cols, extra, checks = run_fig5(cfg)
        _write_series(out / "fig5.csv", t, cols)
        summary = _summary(cfg, checks, run=extra)
    elif name == "fig6":
        run = hamiltonian_run(cfg)
        t, cols, extra5, checks5 = run_fig5(cfg, run)
        _write_series(out / "fig6_dynamics.csv", t, cols)
        grid, fields, info, checks = run_fig6(cfg, run)
        for level, (_, w) in fields.items():
            write_wigner(out / f"fig6_wigner_branch{level}.csv", grid, grid, w)
        summary = _summary(cfg, checks5 + checks, run=extra5, cat=info)
    elif name == "fig7":
        t, cols, err, extra, checks = run_fig7(cfg)
        ObservableSeries(t, cols, err).to_csv(out / "fig7.csv")
        summary = _summary(cfg, checks, run=extra)
    else:
        rows, checks = run_validate(cfg)
        _write_series(out / "validate.csv", np.array([r[0] for r in rows]),
                      {"max_err_mean_photon": np.array([r[1] for r in rows]),
                       "max_err_inversion": np.array([r[2] for r in rows]),
                       "err_steady_mean_photon": np.array([r[3] for r in rows])})
        summary = _summary(cfg, checks)
    _write_json(out / f"{name}_summary.json", summary)
    return summary


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oneatomlaser", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario and write CSV + JSON output")
    run.add_argument("--config", required=True)
    run.add_argument("--scenario", choices=SCENARIOS)
    run.add_argument("--out")
    run.add_argument("--seed", type=int)
    run.add_argument("--trajectories", type=int)
    run.add_argument("--dt", type=float)
    run.add_argument("--tmax", type=float)
    run.add_argument("--workers", type=int)
    val = sub.add_parser("validate", help="analytic-vs-numeric validation suite")
    val.add_argument("--config", required=True)
    val.add_argument("--out")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        if args.command == "run":
            overrides = {"scenario": args.scenario, "master_seed": args.seed, "n_traj": args.trajectories,
                         "dt": args.dt, "t_max": args.tmax, "workers": args.workers}
            cfg = load_config(args.config, overrides, args.out)
        else:
            cfg = load_config(args.config, {"scenario": "validate"}, args.out)
        summary = run_scenario(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    for c in summary["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']:.6g}")
    if args.command == "validate" and not summary["passed"]:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
