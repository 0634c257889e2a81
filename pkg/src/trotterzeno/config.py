"""Experiment configuration: YAML loading, validation and object builders.

A configuration is a mapping; :func:`resolve` checks it and fills defaults,
and the ``build_*`` helpers turn sub-mappings into models.  The schema is
documented in ``docs/config.md``.
"""

from __future__ import annotations

import copy
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .exceptions import ConfigError
from .fock import FockBasis, annihilation, cat_state, coherent_state, fock_state, maximally_mixed, random_density_matrix
from .liouville import Liouvillian, gksl
from .models import (
    Modulation,
    Monomial,
    NumberTerm,
    PolynomialSpec,
    build_hamiltonian,
    cat_projector,
    l_photon_jump,
    schedule_from_spec,
)
from .propagators import Schedule
from .schemes import SplittingScheme

KINDS = (
    "trotter-sweep",
    "suzuki-sweep",
    "time-dep-trotter",
    "zeno-sweep",
    "general-zeno",
    "gate-fidelity",
    "diagnostics",
)
SWEEP_KINDS = KINDS[:-1]
DIAGNOSTIC_CHECKS = ("moment-stability", "l-photon-decay", "zeno-condition", "relative-bound", "fit-recovery")
TOP_LEVEL_KEYS = {
    "name", "description", "kind", "basis", "model", "state", "t", "n_grid", "scheme", "schemes",
    "oracle_tol", "seed", "expect", "checks", "partition", "output",
}


def parse_complex(value, where: str = "value") -> complex:
    """Accept a number, a ``[re, im]`` pair or a string such as ``"1+2j"``."""
    try:
        if isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ValueError
            return complex(float(value[0]), float(value[1]))
        if isinstance(value, str):
            return complex(value.replace(" ", ""))
        return complex(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: cannot read {value!r} as a complex number") from None


def _require(mapping: dict, key: str, where: str):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where} must be a mapping")
    if key not in mapping:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _positive(value, where: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a number, got {value!r}") from None
    if not value > 0 or not np.isfinite(value):
        raise ConfigError(f"{where} must be positive and finite, got {value}")
    return value


def load_yaml(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return data


def catalog_names() -> list[str]:
    root = resources.files("trotterzeno") / "catalog"
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_catalog(name: str) -> dict:
    path = resources.files("trotterzeno") / "catalog" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"no built-in experiment named {name!r}; see `trotterzeno list-experiments`")
    with resources.as_file(path) as p:
        return load_yaml(p)


def validate_n_grid(grid, where: str = "n_grid", minimum: int = 3) -> list[int]:
    if not isinstance(grid, (list, tuple)):
        raise ConfigError(f"{where} must be a list of integers")
    try:
        values = [int(v) for v in grid]
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must contain integers") from None
    if any(v != g for v, g in zip(values, grid)):
        raise ConfigError(f"{where} must contain integers")
    if len(values) < minimum:
        raise ConfigError(f"{where} needs at least {minimum} entries for order fitting, got {len(values)}")
    if values[0] < 1 or any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{where} must be strictly increasing positive integers, got {values}")
    return values


def resolve(raw: dict, *, seed: int | None = None, oracle_tol: float | None = None) -> dict:
    """Validate a raw configuration and return it with defaults filled in.

    Raises
    ------
    ConfigError
        On any schema violation; the message names the offending key.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    cfg = copy.deepcopy(raw)
    unknown = set(cfg) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    kind = _require(cfg, "kind", "config")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {list(KINDS)}, got {kind!r}")
    cfg.setdefault("name", "experiment")
    cfg.setdefault("description", "")
    if seed is not None:
        cfg["seed"] = int(seed)
    cfg.setdefault("seed", 0)
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    if oracle_tol is not None:
        cfg["oracle_tol"] = oracle_tol
    cfg["oracle_tol"] = float(cfg.get("oracle_tol", 1e-11))
    if not 1e-13 <= cfg["oracle_tol"] <= 1e-3:
        raise ConfigError(f"oracle_tol must lie in [1e-13, 1e-3], got {cfg['oracle_tol']}")

    output = cfg.get("output", {})
    if not isinstance(output, dict) or set(output) - {"dir"}:
        raise ConfigError("output must be a mapping with an optional 'dir' key")

    basis = build_basis(_require(cfg, "basis", "config"))
    cfg["basis"] = {"cutoffs": list(basis.cutoffs)}

    if kind == "diagnostics":
        checks = _require(cfg, "checks", "config")
        if not isinstance(checks, list) or not checks:
            raise ConfigError("checks must be a non-empty list")
        for i, check in enumerate(checks):
            ctype = _require(check, "type", f"checks[{i}]")
            if ctype not in DIAGNOSTIC_CHECKS:
                raise ConfigError(f"checks[{i}].type must be one of {list(DIAGNOSTIC_CHECKS)}, got {ctype!r}")
        cfg.setdefault("model", {})
        return cfg

    cfg["t"] = _positive(_require(cfg, "t", "config"), "t")
    cfg["n_grid"] = validate_n_grid(_require(cfg, "n_grid", "config"))
    model = _require(cfg, "model", "config")
    cfg.setdefault("state", {"type": "fock", "occupations": [0] * basis.modes})

    if kind in ("trotter-sweep", "suzuki-sweep"):
        schemes = cfg.pop("schemes", None) or cfg.get("scheme", "trotter" if kind == "trotter-sweep" else "suzuki4")
        schemes = [schemes] if isinstance(schemes, str) else list(schemes)
        for s in schemes:
            try:
                SplittingScheme.from_name(s)
            except ValueError as exc:
                raise ConfigError(f"scheme: {exc}") from None
        cfg["scheme"] = schemes
        _require(model, "A", "model")
        _require(model, "B", "model")
        build_generator(model["A"], basis, "model.A")
        build_generator(model["B"], basis, "model.B")
    elif kind == "time-dep-trotter":
        _require(model, "U", "model")
        _require(model, "V", "model")
        build_schedule(model["U"], basis, cfg["t"], "model.U")
        build_schedule(model["V"], basis, cfg["t"], "model.V")
        part = cfg.setdefault("partition", {"type": "uniform"})
        if part.get("type") not in ("uniform", "random"):
            raise ConfigError("partition.type must be 'uniform' or 'random'")
    else:
        build_generator(_require(model, "generator", "model"), basis, "model.generator")
        build_projector(_require(model, "projector", "model"), basis, "model.projector")
        if kind == "general-zeno":
            delta = float(model.get("delta", 0.5))
            if not 0 < delta < 1:
                raise ConfigError("model.delta must lie in (0, 1)")
            model["delta"] = delta
            model.setdefault("mixer", "random-unitary")
            if model["mixer"] not in ("random-unitary", "conjugation", "identity"):
                raise ConfigError("model.mixer must be random-unitary, conjugation or identity")
            model.setdefault("drive", "pinched")
            if model["drive"] not in ("pinched", "full"):
                raise ConfigError("model.drive must be 'pinched' or 'full'")
            model.setdefault("n_check", 20)
    build_state(cfg["state"], basis, np.random.default_rng(cfg["seed"]), "state")
    return cfg


def build_basis(spec) -> FockBasis:
    cutoffs = _require(spec, "cutoffs", "basis")
    try:
        return FockBasis(tuple(int(c) for c in np.atleast_1d(cutoffs)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"basis.cutoffs: {exc}") from None


def _modulation(spec, where: str) -> Modulation:
    if spec is None:
        return Modulation()
    if isinstance(spec, str):
        spec = {"kind": spec}
    try:
        return Modulation(**spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def build_polynomial(spec: dict, where: str) -> PolynomialSpec:
    monomials = []
    for i, m in enumerate(spec.get("monomials", []) or []):
        w = f"{where}.monomials[{i}]"
        try:
            monomials.append(
                Monomial(
                    int(m.get("mode", 0)),
                    int(_require(m, "k", w)),
                    int(_require(m, "l", w)),
                    parse_complex(m.get("coefficient", 1.0), w),
                    _modulation(m.get("modulation"), w),
                )
            )
        except AttributeError:
            raise ConfigError(f"{w} must be a mapping") from None
    terms = []
    for i, n in enumerate(spec.get("number_terms", []) or []):
        w = f"{where}.number_terms[{i}]"
        coef = parse_complex(n.get("coefficient", 1.0), w)
        if coef.imag != 0:
            raise ConfigError(f"{w}: number-operator coefficients must be real")
        terms.append(NumberTerm(tuple(int(p) for p in _require(n, "powers", w)), coef.real, _modulation(n.get("modulation"), w)))
    try:
        return PolynomialSpec(tuple(monomials), tuple(terms), int(spec.get("max_degree", 4)))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _jump(spec: dict, basis: FockBasis, where: str) -> np.ndarray:
    op = _require(spec, "op", where)
    mode = int(spec.get("mode", 0))
    if not 0 <= mode < basis.modes:
        raise ConfigError(f"{where}.mode {mode} out of range")
    coef = parse_complex(spec.get("coefficient", 1.0), where)
    a = annihilation(basis, mode)
    if op == "a":
        return coef * a
    if op == "adag":
        return coef * a.conj().T
    if op == "l-photon":
        l = int(spec.get("l", 2))
        if basis.cutoffs[mode] < l + 2 or l < 1:
            raise ConfigError(f"{where}: cutoff {basis.cutoffs[mode]} too small for l={l}")
        return coef * l_photon_jump(basis, l, parse_complex(spec.get("alpha", 0.0), where), mode)
    raise ConfigError(f"{where}.op must be 'a', 'adag' or 'l-photon', got {op!r}")


def build_generator(spec: dict, basis: FockBasis, where: str = "generator") -> Liouvillian:
    """Liouvillian from ``{ou: ..., hamiltonian: ..., jumps: [...]}``."""
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(spec) - {"ou", "hamiltonian", "jumps"}
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    dim = basis.total_dim
    ham = None
    jumps = []
    if "hamiltonian" in spec:
        poly = build_polynomial(spec["hamiltonian"], f"{where}.hamiltonian")
        if poly.time_dependent:
            raise ConfigError(f"{where}.hamiltonian: modulations need a time-dependent experiment kind")
        try:
            ham = build_hamiltonian(poly, basis)
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"{where}.hamiltonian: {exc}") from None
    if "ou" in spec:
        ou = spec["ou"]
        lam, mu, mode = float(ou.get("lam", 1.0)), float(ou.get("mu", 0.0)), int(ou.get("mode", 0))
        if lam < 0 or mu < 0:
            raise ConfigError(f"{where}.ou: lam and mu must be non-negative")
        jumps += [_jump({"op": "a", "mode": mode, "coefficient": lam}, basis, where),
                  _jump({"op": "adag", "mode": mode, "coefficient": mu}, basis, where)]
    for i, j in enumerate(spec.get("jumps", []) or []):
        jumps.append(_jump(j, basis, f"{where}.jumps[{i}]"))
    return gksl(ham, jumps, dim=dim)


def build_schedule(spec: dict, basis: FockBasis, horizon: float, where: str) -> Schedule:
    """Commutator schedule from ``{hamiltonian: polynomial with modulations}``."""
    if not isinstance(spec, dict) or set(spec) - {"hamiltonian"}:
        raise ConfigError(f"{where} must be a mapping with a single 'hamiltonian' key")
    poly = build_polynomial(spec.get("hamiltonian", {}), f"{where}.hamiltonian")
    try:
        return schedule_from_spec(poly, basis, horizon)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def build_projector(spec: dict, basis: FockBasis, where: str = "projector") -> np.ndarray:
    ptype = _require(spec, "type", where)
    if ptype == "cat":
        try:
            return cat_projector(basis, parse_complex(_require(spec, "alpha", where), where), int(spec.get("mode", 0)))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    if ptype == "levels":
        levels = [int(v) for v in _require(spec, "levels", where)]
        if not levels or any(not 0 <= v < basis.total_dim for v in levels):
            raise ConfigError(f"{where}.levels must be flat indices within the basis")
        p = np.zeros((basis.total_dim,) * 2, dtype=complex)
        p[levels, levels] = 1.0
        return p
    raise ConfigError(f"{where}.type must be 'cat' or 'levels', got {ptype!r}")


def build_state(spec: dict, basis: FockBasis, rng: np.random.Generator, where: str = "state") -> np.ndarray:
    stype = _require(spec, "type", where)
    try:
        if stype == "fock":
            return fock_state(basis, spec.get("occupations", [0] * basis.modes)).dm()
        if stype == "coherent":
            alpha = spec.get("alpha", 0.0)
            alphas = [parse_complex(a, where) for a in alpha] if isinstance(alpha, list) and basis.modes > 1 else parse_complex(alpha, where)
            return coherent_state(basis, alphas).dm()
        if stype == "cat":
            return cat_state(basis, parse_complex(spec.get("alpha", 1.0), where), spec.get("parity", "plus"), int(spec.get("mode", 0))).dm()
        if stype == "maximally-mixed":
            return maximally_mixed(basis)
        if stype == "random":
            return random_density_matrix(basis, rng, spec.get("rank"))
        if stype == "file":
            x = np.load(_require(spec, "path", where))
            if x.shape != (basis.total_dim,) * 2:
                raise ConfigError(f"{where}: file state has shape {x.shape}, basis needs {(basis.total_dim,) * 2}")
            return np.asarray(x, dtype=complex)
    except ConfigError:
        raise
    except (ValueError, IndexError, OSError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}.type must be fock, coherent, cat, maximally-mixed, random or file, got {stype!r}")
