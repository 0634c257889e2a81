"""Experiment runners behind the command line.

Each runner takes a resolved configuration (see :mod:`trotterzeno.config`)
and returns an :class:`ExperimentResult` holding CSV rows and a JSON-ready
report.  Sweeps over ``n`` may run on a thread pool; rows are always sorted
by scheme and ``n``.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import config as cfgmod
from .exceptions import FitError
from .fock import FockBasis, annihilation
from .liouville import ProjectorSuperop, commutator_generator
from .metrics import (
    SobolevWeight,
    drift_diagnostics,
    drift_inequality_check,
    fit_order,
    hs_norm,
    relative_bound_diagnostic,
    trace_norm,
    zeno_condition_check,
)
from .models import cat_projector, l_photon_dissipation, l_photon_jump, zeno_gate_target
from .propagators import PropagatorCache, Schedule, orbit, propagator, reference_evolution, semigroup_step
from .schemes import (
    Partition,
    SplittingScheme,
    compressed_generator_propagator,
    conjugation_mixer,
    make_uniform_power_contraction,
    random_complement_unitary,
    scheme_step_map,
    schedule_step_map,
    suzuki_product,
    telescopic_defect,
    time_dependent_trotter,
    trotter_step_map,
    zeno_product,
    zeno_product_general,
    zeno_step_map,
)

SWEEP_COLUMNS = [
    "scheme",
    "n",
    "error_trace_norm",
    "trace_drift",
    "min_eig",
    "top_level_mass",
    "wall_time_ms",
    "defect_max",
    "telescopic_bound",
    "telescopic_holds",
]
GENERAL_ZENO_COLUMNS = SWEEP_COLUMNS + ["mp_difference", "mp_bound", "power_ratio"]
DIAGNOSTIC_COLUMNS = ["check", "item", "value"]


@dataclass
class ExperimentResult:
    columns: list[str]
    rows: list[dict]
    report: dict = field(default_factory=dict)


def _map(fn: Callable, items: list, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _row(scheme: str, n: int, product, oracle, basis: FockBasis, elapsed: float, reference_trace: float, tele=None) -> dict:
    diag = drift_diagnostics(product, basis, reference_trace)
    row = {
        "scheme": scheme,
        "n": n,
        "error_trace_norm": trace_norm(product - oracle),
        "trace_drift": diag.trace_drift,
        "min_eig": diag.min_eig,
        "top_level_mass": max(diag.top_level_mass),
        "wall_time_ms": elapsed,
    }
    if tele is not None:
        row.update(
            defect_max=tele.max_defect,
            telescopic_bound=tele.bound,
            telescopic_holds=bool(tele.product_error <= tele.bound + 1e-12),
        )
    return row


def _fit(rows: list[dict], cfg: dict, label: str | None = None) -> dict:
    sel = [r for r in rows if label is None or r["scheme"] == label]
    try:
        rep = fit_order([r["n"] for r in sel], [r["error_trace_norm"] for r in sel], cfg["oracle_tol"])
    except FitError as exc:
        return {"error": str(exc), "errors": [r["error_trace_norm"] for r in sel]}
    out = rep.to_dict()
    expect = cfg.get("expect") or {}
    checks = {}
    if "slope" in expect:
        lo, hi = sorted(float(v) for v in expect["slope"])
        checks["slope_in_band"] = bool(lo <= rep.slope <= hi)
    if "r2_min" in expect:
        checks["r2_ok"] = bool(rep.r_squared >= float(expect["r2_min"]))
    if checks:
        out["checks"] = checks
    return out


def _timed(fn):
    start = time.perf_counter()
    value = fn()
    return value, 1e3 * (time.perf_counter() - start)


def _finalize_rows(rows: list[dict], timing: bool) -> list[dict]:
    rows = sorted(rows, key=lambda r: (r["scheme"], r["n"]))
    if not timing:
        for r in rows:
            r["wall_time_ms"] = 0.0
    return rows


def run_splitting_sweep(cfg: dict, threads: int = 1, timing: bool = True) -> ExperimentResult:
    basis = cfgmod.build_basis(cfg["basis"])
    a = cfgmod.build_generator(cfg["model"]["A"], basis, "model.A")
    b = cfgmod.build_generator(cfg["model"]["B"], basis, "model.B")
    x = cfgmod.build_state(cfg["state"], basis, np.random.default_rng(cfg["seed"]))
    t = cfg["t"]
    full = a + b
    cache = PropagatorCache()
    oracle = semigroup_step(full, t, x, cache=cache)
    exact_step = lambda t1, s, y: propagator(full, t1 - s, cache=cache)(y)
    tasks = [(name, n) for name in cfg["scheme"] for n in cfg["n_grid"]]

    def work(task):
        name, n = task
        scheme = SplittingScheme.from_name(name)
        product, elapsed = _timed(lambda: suzuki_product(scheme, a, b, t, n, x, cache))
        tele = telescopic_defect(scheme_step_map(scheme, a, b, cache), exact_step, Partition.uniform(t, n), x)
        return _row(scheme.name, n, product, oracle, basis, elapsed, float(np.trace(x).real), tele)

    rows = _finalize_rows(_map(work, tasks, threads), timing)
    fits = {SplittingScheme.from_name(s).name: _fit(rows, cfg, SplittingScheme.from_name(s).name) for s in cfg["scheme"]}
    return ExperimentResult(SWEEP_COLUMNS, rows, {"fits": fits, "trace_preserving": True})


def _partition(cfg: dict, n: int) -> Partition:
    part = cfg.get("partition", {"type": "uniform"})
    if part.get("type", "uniform") == "uniform":
        return Partition.uniform(cfg["t"], n)
    # random steps in [1/2, 3/2] of the uniform step, rescaled to end at t
    rng = np.random.default_rng([cfg["seed"], n])
    steps = rng.uniform(0.5, 1.5, n)
    steps *= cfg["t"] / steps.sum()
    pts = np.concatenate([[0.0], np.cumsum(steps)])
    pts[-1] = cfg["t"]
    return Partition(tuple(pts))


def run_time_dependent(cfg: dict, threads: int = 1, timing: bool = True) -> ExperimentResult:
    basis = cfgmod.build_basis(cfg["basis"])
    t = cfg["t"]
    u = cfgmod.build_schedule(cfg["model"]["U"], basis, t, "model.U")
    v = cfgmod.build_schedule(cfg["model"]["V"], basis, t, "model.V")
    x = cfgmod.build_state(cfg["state"], basis, np.random.default_rng(cfg["seed"]))
    tol = cfg["oracle_tol"]
    total = u + v
    oracle = reference_evolution(total, 0.0, t, x, tol)
    cache = PropagatorCache()
    exact_step = schedule_step_map(total, tol=tol, cache=cache)

    def work(n):
        part = _partition(cfg, n)
        product, elapsed = _timed(lambda: time_dependent_trotter(u, v, part, x, tol=tol, cache=cache))
        step = trotter_step_map(schedule_step_map(u, tol=tol, cache=cache), schedule_step_map(v, tol=tol, cache=cache))
        tele = telescopic_defect(step, exact_step, part, x)
        row = _row("trotter", n, product, oracle, basis, elapsed, float(np.trace(x).real), tele)
        row["max_step"] = part.max_step
        return row

    rows = _finalize_rows(_map(work, cfg["n_grid"], threads), timing)
    uniform = cfg.get("partition", {}).get("type", "uniform") == "uniform"
    if uniform:
        fit = _fit(rows, cfg)
    else:
        # order in the largest step: error ~ h_max^m, fit against 1/h_max
        shim = [dict(r, n=1.0 / r["max_step"]) for r in rows]
        fit = _fit(shim, cfg)
        fit["abscissa"] = "1/max_step"
    for r in rows:
        r.pop("max_step")
    return ExperimentResult(SWEEP_COLUMNS, rows, {"fits": {"trotter": fit}, "trace_preserving": True})


def _zeno_setup(cfg: dict):
    basis = cfgmod.build_basis(cfg["basis"])
    gen = cfgmod.build_generator(cfg["model"]["generator"], basis, "model.generator")
    proj = ProjectorSuperop(cfgmod.build_projector(cfg["model"]["projector"], basis, "model.projector"))
    x = cfgmod.build_state(cfg["state"], basis, np.random.default_rng(cfg["seed"]))
    return basis, gen, proj, x


def _compressed_step(proj: ProjectorSuperop, gen):
    maps: dict = {}

    def step(t1, s, y):
        h = t1 - s
        if h not in maps:
            maps[h] = compressed_generator_propagator(proj, gen, h)
        return maps[h](y)

    return step


def run_zeno_sweep(cfg: dict, threads: int = 1, timing: bool = True) -> ExperimentResult:
    basis, gen, proj, x = _zeno_setup(cfg)
    t = cfg["t"]
    oracle = compressed_generator_propagator(proj, gen, t)(x)
    ref_trace = float(np.trace(oracle).real)
    cache = PropagatorCache()
    exact_step = _compressed_step(proj, gen)

    def work(n):
        product, elapsed = _timed(lambda: zeno_product(proj, gen, t, n, x, cache))
        step = zeno_step_map(proj, lambda t1, s, y: propagator(gen, t1 - s, cache=cache)(y))
        tele = telescopic_defect(step, exact_step, Partition.uniform(t, n), proj(x))
        return _row("zeno", n, product, oracle, basis, elapsed, ref_trace, tele)

    rows = _finalize_rows(_map(work, cfg["n_grid"], threads), timing)
    report = {"fits": {"zeno": _fit(rows, cfg)}, "trace_preserving": False, "reference_trace": ref_trace}
    report.update(_gate_report(cfg, basis, gen, t))
    return ExperimentResult(SWEEP_COLUMNS, rows, report)


def _gate_report(cfg: dict, basis: FockBasis, gen, t: float) -> dict:
    pspec = cfg["model"]["projector"]
    if pspec.get("type") != "cat" or gen.hamiltonian is None or gen.jumps:
        return {}
    alpha = cfgmod.parse_complex(pspec["alpha"])
    gate = zeno_gate_target(basis, alpha, t, gen.hamiltonian, int(pspec.get("mode", 0)))
    allowed = 10 * math.exp(-2 * abs(alpha) ** 2)
    return {
        "gate": {
            "discrepancy": gate.discrepancy,
            "discrepancy_allowed": allowed,
            "discrepancy_ok": bool(gate.discrepancy <= allowed),
            "drive_element": [gate.drive_element.real, gate.drive_element.imag],
            "idealized_element": 2 * alpha.real,
        }
    }


def run_gate_fidelity(cfg: dict, threads: int = 1, timing: bool = True) -> ExperimentResult:
    """Zeno product on the four code-block matrix units against the compressed gate."""
    basis, gen, proj, x = _zeno_setup(cfg)
    pspec = cfg["model"]["projector"]
    if pspec.get("type") != "cat":
        raise cfgmod.ConfigError("gate-fidelity needs a cat projector")
    t = cfg["t"]
    alpha = cfgmod.parse_complex(pspec["alpha"])
    gate = zeno_gate_target(basis, alpha, t, gen.hamiltonian, int(pspec.get("mode", 0)))
    v = gate.code_basis
    u = gate.embed(gate.compressed_unitary)
    units = [np.outer(v[:, i], v[:, j].conj()) for i in range(2) for j in range(2)]
    targets = [u @ e @ u.conj().T for e in units]
    oracle = u @ proj(x) @ u.conj().T
    cache = PropagatorCache()

    def work(n):
        outs, elapsed = _timed(lambda: [zeno_product(proj, gen, t, n, e, cache) for e in units])
        err = max(trace_norm(o - g) for o, g in zip(outs, targets))
        product = zeno_product(proj, gen, t, n, x, cache)
        row = _row("zeno", n, product, oracle, basis, elapsed, float(np.trace(oracle).real))
        row["error_trace_norm"] = err
        step = zeno_step_map(proj, lambda t1, s, y: propagator(gen, t1 - s, cache=cache)(y))
        # the error column is a max over code matrix units, so the telescopic check is too
        teles = [telescopic_defect(step, _compressed_step(proj, gen), Partition.uniform(t, n), e) for e in units]
        worst = max(teles, key=lambda r: r.max_defect)
        row.update(defect_max=worst.max_defect, telescopic_bound=worst.bound,
                   telescopic_holds=all(r.product_error <= r.bound + 1e-12 for r in teles))
        return row

    rows = _finalize_rows(_map(work, cfg["n_grid"], threads), timing)
    report = {"fits": {"zeno": _fit(rows, cfg)}, "trace_preserving": False}
    report.update(_gate_report(cfg, basis, gen, t))
    return ExperimentResult(SWEEP_COLUMNS, rows, report)


def _pinched(proj: ProjectorSuperop, h: np.ndarray) -> np.ndarray:
    p = proj.projector
    q = np.eye(p.shape[0]) - p
    return p @ h @ p + q @ h @ q


def run_general_zeno(cfg: dict, threads: int = 1, timing: bool = True) -> ExperimentResult:
    basis, gen, proj, x = _zeno_setup(cfg)
    model = cfg["model"]
    rng = np.random.default_rng(cfg["seed"] + 1)
    if model["drive"] == "pinched":
        if gen.jumps:
            raise cfgmod.ConfigError("a pinched drive needs a Hamiltonian-only generator")
        gen = commutator_generator(_pinched(proj, gen.hamiltonian))
    mixer = {
        "random-unitary": lambda: random_complement_unitary(proj, rng),
        "conjugation": lambda: conjugation_mixer(proj, rng),
        "identity": lambda: None,
    }[model["mixer"]]()
    spec = make_uniform_power_contraction(proj, model["delta"], mixer)
    ratios = spec.verify(int(model["n_check"]), slack=1e-9)
    t = cfg["t"]
    schedule = Schedule.constant(gen, t)
    oracle = compressed_generator_propagator(proj, gen, t)(x)
    ref_trace = float(np.trace(oracle).real)
    x_norm = trace_norm(x)
    cache = PropagatorCache()
    exact_step = _compressed_step(proj, gen)

    def work(n):
        part = Partition.uniform(t, n)
        product, elapsed = _timed(lambda: zeno_product_general(spec, schedule, part, x, cache=cache))
        projective = zeno_product_general(
            type(spec)(proj, proj), schedule, part, x, cache=cache
        )
        step = zeno_step_map(spec, schedule_step_map(schedule, cache=cache))
        tele = telescopic_defect(step, exact_step, part, x)
        row = _row("general-zeno", n, product, oracle, basis, elapsed, ref_trace, tele)
        ratio = float(spec.power_defects(n)[-1] / model["delta"] ** n) if n <= 64 else float("nan")
        row.update(
            mp_difference=hs_norm(product - projective),
            mp_bound=model["delta"] ** n * x_norm,
            power_ratio=ratio,
        )
        return row

    rows = _finalize_rows(_map(work, cfg["n_grid"], threads), timing)
    report = {
        "fits": {"general-zeno": _fit(rows, cfg)} if model["drive"] == "full" else {},
        "trace_preserving": False,
        "reference_trace": ref_trace,
        "power_ratios": [float(r) for r in ratios],
        "mp_difference_norm": "hilbert-schmidt",
        "mp_difference_within_delta_n": bool(all(r["mp_difference"] <= r["mp_bound"] + 1e-10 for r in rows)),
    }
    if model["drive"] == "pinched":
        # with a drive commuting with P the Zeno part is exact and the error
        # is delta^n times a bounded term: fit ln(error) linearly in n
        errs = np.array([r["error_trace_norm"] for r in rows])
        ns = np.array([r["n"] for r in rows], dtype=float)
        keep = errs > 100 * cfg["oracle_tol"]
        if keep.sum() >= 3:
            slope = float(np.polyfit(ns[keep], np.log(errs[keep]), 1)[0])
            report["geometric_fit"] = {"ratio_per_step": math.exp(slope), "delta": model["delta"]}
    return ExperimentResult(GENERAL_ZENO_COLUMNS, rows, report)


# diagnostics -------------------------------------------------------------------


def _check_l_photon_decay(check: dict, basis: FockBasis, rng) -> tuple[list, dict]:
    l = int(check.get("l", 2))
    alpha = cfgmod.parse_complex(check.get("alpha", 2.0))
    horizon = float(check.get("t", 2.0))
    samples = int(check.get("samples", 41))
    gen = l_photon_dissipation(basis, l, alpha)
    jump = l_photon_jump(basis, l, alpha)
    x = cfgmod.build_state(check.get("state", {"type": "fock", "occupations": [0] * basis.modes}), basis, rng)
    times = np.linspace(0.0, horizon, samples)
    states = orbit(gen, times, x)
    f = np.array([np.real(np.trace(jump @ s @ jump.conj().T)) for s in states])
    rate = -float(np.polyfit(times, np.log(f), 1)[0])
    target = float(check.get("target_rate", math.factorial(l)))
    rel_tol = float(check.get("rel_tol", 0.25))
    bound_ratio = f / (f[0] * np.exp(-target * times))
    rows = [("l-photon-decay", f"f(t={tt:.4f})", float(v)) for tt, v in zip(times, f)]
    summary = {
        "fitted_rate": rate,
        "target_rate": target,
        "relative_deviation": abs(rate - target) / target,
        "within_tolerance": bool(abs(rate - target) <= rel_tol * target),
        "rel_tol": rel_tol,
        "max_bound_ratio": float(np.max(bound_ratio)),
        "bound_holds": bool(np.all(bound_ratio <= 1 + 1e-9)),
    }
    return rows, summary


def psd_unit_states(dim: int, levels: int) -> list[tuple[str, np.ndarray]]:
    """PSD states spanning every matrix unit on the lowest ``levels`` levels.

    ``|i><i|`` plus the pure states ``(|i> + |j>)/sqrt2`` and
    ``(|i> + i|j>)/sqrt2`` for ``i < j``.
    """
    out = []
    for i in range(levels):
        e = np.zeros((dim, dim), dtype=complex)
        e[i, i] = 1.0
        out.append((f"|{i}><{i}|", e))
    for i in range(levels):
        for j in range(i + 1, levels):
            for phase, tag in ((1.0, "+"), (1j, "+i")):
                psi = np.zeros(dim, dtype=complex)
                psi[i], psi[j] = 1 / np.sqrt(2), phase / np.sqrt(2)
                out.append((f"|{i}>{tag}|{j}>", np.outer(psi, psi.conj())))
    return out


def _check_moment_stability(check: dict, basis: FockBasis, rng) -> tuple[list, dict]:
    l = int(check.get("l", 2))
    alpha = cfgmod.parse_complex(check.get("alpha", 2.0))
    k = float(check.get("k", 2))
    rate = float(check.get("rate", l / 2))
    power = float(check.get("power", k / 2 - 1 + l))
    gen = l_photon_dissipation(basis, l, alpha)
    levels = gen.dim - gen.leakage_margin()
    labelled = psd_unit_states(gen.dim, levels)
    for i in range(int(check.get("random_states", 20))):
        g = rng.standard_normal((levels, levels)) + 1j * rng.standard_normal((levels, levels))
        rho = np.zeros((gen.dim, gen.dim), dtype=complex)
        rho[:levels, :levels] = g @ g.conj().T
        labelled.append((f"random[{i}]", rho / np.trace(rho).real))
    rep = drift_inequality_check(gen, k, rate, power, [s for _, s in labelled], levels)
    tol = float(check.get("violation_tol", 1e-9))
    rows = [("moment-stability", label, float(m)) for (label, _), m in zip(labelled, rep.margins)]
    summary = {
        "rate": rate,
        "power": power,
        "fitted_constant": rep.constant,
        "admissible_levels": levels,
        "states": len(labelled),
        "max_margin": rep.max_margin,
        "violations": int(np.sum(rep.margins > tol)),
        "holds": bool(rep.max_margin <= tol),
    }
    return rows, summary


def _check_zeno_condition(check: dict, basis: FockBasis, rng) -> tuple[list, dict]:
    alpha = cfgmod.parse_complex(check.get("alpha", 2.0))
    proj = ProjectorSuperop(cat_projector(basis, alpha))
    a = annihilation(basis, 0)
    h = a + a.conj().T
    horizon = float(check.get("t", 0.5))
    points = int(check.get("points", 4))
    refinements = int(check.get("refinements", 3))
    sched = Schedule.constant(commutator_generator(h), horizon)
    rows, estimates = [], []
    for r in range(refinements):
        span = horizon / 2**r
        rep = zeno_condition_check(proj, sched, np.linspace(0.0, span, points))
        estimates.append(rep.b)
        rows.append(("zeno-condition", f"b(span={span:.4g})", rep.b))
    summary = {
        "b_estimates": estimates,
        "b": max(estimates),
        "stable_within_20pct": bool(all(e2 <= 1.2 * e1 for e1, e2 in zip(estimates, estimates[1:]))),
    }
    return rows, summary


def _check_relative_bound(check: dict, basis: FockBasis, rng) -> tuple[list, dict]:
    gen_spec = check.get("generator", {"hamiltonian": {"number_terms": [{"powers": [1] * basis.modes}]}})
    gen = cfgmod.build_generator(gen_spec, basis, "checks.generator")
    k = check.get("k", 4)
    weight = SobolevWeight(basis, k)
    est = relative_bound_diagnostic(gen, weight, int(check.get("samples", 32)), levels=check.get("levels"), rng=rng)
    return [("relative-bound", "estimate", est["estimate"])], est


def _check_fit_recovery(check: dict, basis: FockBasis, rng) -> tuple[list, dict]:
    slopes = [float(s) for s in check.get("slopes", [-1.0, -2.0, -4.0])]
    noise = float(check.get("noise", 0.01))
    trials = int(check.get("trials", 20))
    n = np.unique(np.round(np.logspace(1, 2, 8)).astype(int))
    rows, worst = [], 0.0
    for slope in slopes:
        for trial in range(trials):
            errs = 3.0 * n.astype(float) ** slope * (1 + noise * rng.standard_normal(n.size))
            fitted = fit_order(n, errs).slope
            worst = max(worst, abs(fitted - slope))
            rows.append(("fit-recovery", f"slope={slope:g}/trial={trial}", fitted))
    tol = float(check.get("tolerance", 0.05))
    return rows, {"max_deviation": worst, "tolerance": tol, "holds": bool(worst <= tol), "noise": noise}


CHECKS = {
    "l-photon-decay": _check_l_photon_decay,
    "moment-stability": _check_moment_stability,
    "zeno-condition": _check_zeno_condition,
    "relative-bound": _check_relative_bound,
    "fit-recovery": _check_fit_recovery,
}


def run_diagnostics(cfg: dict, threads: int = 1, timing: bool = True) -> ExperimentResult:
    basis = cfgmod.build_basis(cfg["basis"])
    rng = np.random.default_rng(cfg["seed"])
    rows, summaries = [], []
    for check in cfg["checks"]:
        r, s = CHECKS[check["type"]](check, basis, rng)
        rows += [dict(zip(DIAGNOSTIC_COLUMNS, item)) for item in r]
        summaries.append({"type": check["type"], **s})
    return ExperimentResult(DIAGNOSTIC_COLUMNS, rows, {"checks": summaries})


RUNNERS = {
    "trotter-sweep": run_splitting_sweep,
    "suzuki-sweep": run_splitting_sweep,
    "time-dep-trotter": run_time_dependent,
    "zeno-sweep": run_zeno_sweep,
    "gate-fidelity": run_gate_fidelity,
    "general-zeno": run_general_zeno,
    "diagnostics": run_diagnostics,
}


def run_experiment(cfg: dict, threads: int = 1, timing: bool = True) -> ExperimentResult:
    """Dispatch a resolved configuration to its runner."""
    return RUNNERS[cfg["kind"]](cfg, threads=threads, timing=timing)
