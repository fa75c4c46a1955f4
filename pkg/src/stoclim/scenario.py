"""Scenario configuration: parsing, validation and canonical form.

A scenario is a JSON document::

    {
      "schema": "stoclim/1",
      "command": "master",
      "system": {"hamiltonian": [[0, 0], [0, 1]],
                 "couplings": [{"operator": [[0, 1], [1, 0]], "density": "b"}],
                 "hbar": 1.0},
      "densities": {"b": {"preset": "ohmic", "params": {"alpha": 0.05, "cutoff": 5}}},
      "reservoir": {"covariance": "thermal", "beta": 1.0, "mu": 0.0},
      "numerics": {"dt": 0.01, "t_final": 5.0}
    }

Matrices are nested lists of reals, or ``{"re": [[...]], "im": [[...]]}``.
Every problem is collected with its field path before anything is raised.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, ValidationError

SCHEMA = "stoclim/1"
COMMANDS = ("coefficients", "generator", "master", "heisenberg", "golden-rule", "stationary",
            "wcl-converge", "qsde-compare", "degeneracy", "oracle-audit")
EDGE_POLICIES = ("error", "half")
STEPPERS = ("euler-ito", "exponential")

NUMERIC_DEFAULTS = {
    "quad_tol": 1e-11,
    "degeneracy_tol": 1e-9,
    "oracle_tol": 1e-6,
    "edge_policy": "error",
    "dt": 1e-2,
    "t_final": 10.0,
    "stride": 1,
    "lambdas": (0.5, 0.25, 0.125, 0.0625),
    "n_max": 1,
    "stepper": "euler-ito",
    "wcl_t": 1.0,
    "wcl_s": 1.0,
    "hydrogen_n_max": 0,
}


@dataclass(frozen=True)
class DensityConfig:
    preset: str | None = None
    params: tuple = ()
    csv: str | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario; matrices are tuples of tuples of complex."""

    command: str | None
    hamiltonian: tuple
    couplings: tuple
    density_refs: tuple
    densities: tuple
    covariance: str = "vacuum"
    beta: float | None = None
    mu: float = 0.0
    hbar: float = 1.0
    numerics: tuple = ()
    initial_state: tuple | None = None
    initial_index: int | None = None
    observable: tuple | None = None
    wcl_omega: float | None = None
    wcl_density: str | None = None
    source: str = field(default="", compare=False)

    def num(self, key):
        return dict(self.numerics).get(key, NUMERIC_DEFAULTS[key])

    def with_numerics(self, **kw) -> "ScenarioConfig":
        d = dict(self.numerics)
        d.update({k: v for k, v in kw.items() if v is not None})
        return replace(self, numerics=tuple(sorted(d.items())))

    def with_command(self, command: str) -> "ScenarioConfig":
        return replace(self, command=command)

    def density_map(self) -> dict:
        return dict(self.densities)


class _Collector:
    def __init__(self):
        self.errors = []

    def add(self, path, msg):
        self.errors.append((path, msg))


def _matrix(value, path, col: _Collector):
    if isinstance(value, dict):
        unknown = set(value) - {"re", "im"}
        if unknown or "re" not in value:
            col.add(path, "complex matrix needs keys 're' and optional 'im'")
            return None
        re = _matrix(value["re"], path + ".re", col)
        im = _matrix(value["im"], path + ".im", col) if "im" in value else None
        if re is None:
            return None
        if im is not None:
            if len(im) != len(re) or len(im[0]) != len(re[0]):
                col.add(path, "real and imaginary parts differ in shape")
                return None
            return tuple(tuple(complex(a.real, b.real) for a, b in zip(r, i)) for r, i in zip(re, im))
        return re
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        col.add(path, "expected a nonempty list of rows")
        return None
    n = len(value[0])
    rows = []
    for i, r in enumerate(value):
        if len(r) != n:
            col.add(path, f"row {i} has {len(r)} entries, expected {n}")
            return None
        row = []
        for j, x in enumerate(r):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                col.add(f"{path}[{i}][{j}]", "expected a finite number")
                return None
            row.append(complex(float(x)))
        rows.append(tuple(row))
    return tuple(rows)


def _number(obj, key, path, col, positive=False, required=False, integer=False):
    if key not in obj:
        if required:
            col.add(path, "required")
        return None
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        col.add(path, "expected a finite number")
        return None
    if integer and int(v) != v:
        col.add(path, "expected an integer")
        return None
    if positive and not v > 0:
        col.add(path, "must be positive")
        return None
    return int(v) if integer else float(v)


def _check_keys(obj, allowed, path, col):
    if not isinstance(obj, dict):
        col.add(path, "expected an object")
        return False
    for k in sorted(set(obj) - set(allowed)):
        col.add(f"{path}.{k}" if path else k, "unknown field")
    return True


def parse_config(source, base_dir=None) -> ScenarioConfig:
    """Parse and validate a scenario from a file path or an already-loaded dict.

    Raises
    ------
    ConfigError
        With every ``(field_path, message)`` problem found.
    """
    label = ""
    if isinstance(source, dict):
        doc = source
    else:
        p = Path(source)
        label = str(p)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError([("", f"cannot read {p}: {exc.strerror}")]) from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([("", f"invalid JSON at line {exc.lineno}: {exc.msg}")]) from exc
        base_dir = base_dir or p.parent
    col = _Collector()
    if not _check_keys(doc, ("schema", "command", "system", "densities", "reservoir", "numerics",
                             "initial_state", "observable", "wcl"), "", col):
        raise ConfigError(col.errors)
    if doc.get("schema") != SCHEMA:
        col.add("schema", f"expected {SCHEMA!r}")
    command = doc.get("command")
    if command is not None and command not in COMMANDS:
        col.add("command", f"unknown command {command!r}")

    sysb = doc.get("system")
    h = None
    coup, refs = [], []
    hbar = 1.0
    if sysb is None:
        col.add("system", "required")
    elif _check_keys(sysb, ("hamiltonian", "couplings", "hbar"), "system", col):
        if "hamiltonian" not in sysb:
            col.add("system.hamiltonian", "required")
        else:
            h = _matrix(sysb["hamiltonian"], "system.hamiltonian", col)
        hb = _number(sysb, "hbar", "system.hbar", col, positive=True)
        hbar = 1.0 if hb is None else hb
        cl = sysb.get("couplings", [])
        if not isinstance(cl, list):
            col.add("system.couplings", "expected a list")
            cl = []
        for i, c in enumerate(cl):
            path = f"system.couplings[{i}]"
            if not _check_keys(c, ("operator", "density"), path, col):
                continue
            m = _matrix(c.get("operator"), path + ".operator", col) if "operator" in c else None
            if "operator" not in c:
                col.add(path + ".operator", "required")
            ref = c.get("density")
            if not isinstance(ref, str):
                col.add(path + ".density", "expected a density label")
            if m is not None and isinstance(ref, str):
                coup.append(m)
                refs.append(ref)

    dens = {}
    db = doc.get("densities", {})
    if _check_keys(db, db.keys() if isinstance(db, dict) else (), "densities", col):
        for lab, spec in sorted(db.items()):
            path = f"densities.{lab}"
            if not _check_keys(spec, ("preset", "params", "csv"), path, col):
                continue
            if ("preset" in spec) == ("csv" in spec):
                col.add(path, "give exactly one of 'preset' or 'csv'")
                continue
            if "csv" in spec:
                csvp = Path(spec["csv"])
                if not csvp.is_absolute() and base_dir is not None:
                    csvp = Path(base_dir) / csvp
                dens[lab] = DensityConfig(csv=str(csvp))
                continue
            params = spec.get("params", {})
            if not isinstance(params, dict):
                col.add(path + ".params", "expected an object")
                continue
            dens[lab] = DensityConfig(spec["preset"], tuple(sorted(
                (k, tuple(v) if isinstance(v, list) else v) for k, v in params.items())))
    for i, r in enumerate(refs):
        if r not in dens:
            col.add(f"system.couplings[{i}].density", f"unresolved density {r!r}")

    rb = doc.get("reservoir", {"covariance": "vacuum"})
    kind, beta, mu = "vacuum", None, 0.0
    if _check_keys(rb, ("covariance", "beta", "mu"), "reservoir", col):
        kind = rb.get("covariance", "vacuum")
        if kind not in ("vacuum", "thermal"):
            col.add("reservoir.covariance", "expected 'vacuum' or 'thermal'")
        if kind == "thermal":
            beta = _number(rb, "beta", "reservoir.beta", col, positive=True, required=True)
            m = _number(rb, "mu", "reservoir.mu", col)
            mu = 0.0 if m is None else m
        elif "beta" in rb or "mu" in rb:
            col.add("reservoir", "beta and mu apply only to a thermal covariance")

    nb = doc.get("numerics", {})
    numerics = {}
    if _check_keys(nb, NUMERIC_DEFAULTS.keys(), "numerics", col):
        for key in ("quad_tol", "degeneracy_tol", "oracle_tol", "dt", "t_final"):
            v = _number(nb, key, f"numerics.{key}", col, positive=key != "t_final")
            if key == "t_final" and v is not None and v < 0:
                col.add("numerics.t_final", "must be nonnegative")
            elif v is not None:
                numerics[key] = v
        for key in ("wcl_t", "wcl_s"):
            v = _number(nb, key, f"numerics.{key}", col)
            if v is not None and v < 0:
                col.add(f"numerics.{key}", "must be nonnegative")
            elif v is not None:
                numerics[key] = v
        for key, lo in (("stride", 1), ("n_max", 1), ("hydrogen_n_max", 0)):
            v = _number(nb, key, f"numerics.{key}", col, integer=True)
            if v is not None and v < lo:
                col.add(f"numerics.{key}", f"must be at least {lo}")
            elif v is not None:
                numerics[key] = v
        if "edge_policy" in nb:
            if nb["edge_policy"] not in EDGE_POLICIES:
                col.add("numerics.edge_policy", f"expected one of {EDGE_POLICIES}")
            else:
                numerics["edge_policy"] = nb["edge_policy"]
        if "stepper" in nb:
            if nb["stepper"] not in STEPPERS:
                col.add("numerics.stepper", f"expected one of {STEPPERS}")
            else:
                numerics["stepper"] = nb["stepper"]
        if "lambdas" in nb:
            lams = nb["lambdas"]
            if (not isinstance(lams, list) or len(lams) < 3
                    or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in lams)):
                col.add("numerics.lambdas", "expected at least three numbers")
            elif not all(0 < x <= 1 for x in lams) or any(b >= a for a, b in zip(lams, lams[1:])):
                col.add("numerics.lambdas", "must be strictly decreasing within (0, 1]")
            else:
                numerics["lambdas"] = tuple(float(x) for x in lams)

    init, init_idx = None, None
    if "initial_state" in doc:
        ib = doc["initial_state"]
        if _check_keys(ib, ("matrix", "basis_index"), "initial_state", col):
            if "matrix" in ib:
                init = _matrix(ib["matrix"], "initial_state.matrix", col)
            elif "basis_index" in ib:
                init_idx = _number(ib, "basis_index", "initial_state.basis_index", col, integer=True)
            else:
                col.add("initial_state", "give 'matrix' or 'basis_index'")
    obs = _matrix(doc["observable"], "observable", col) if "observable" in doc else None
    wcl_omega, wcl_density = None, None
    if "wcl" in doc:
        wb = doc["wcl"]
        if _check_keys(wb, ("omega", "density"), "wcl", col):
            wcl_omega = _number(wb, "omega", "wcl.omega", col)
            wcl_density = wb.get("density")
            if wcl_density is not None and wcl_density not in dens:
                col.add("wcl.density", f"unresolved density {wcl_density!r}")

    cfg = None
    if h is not None and (kind != "thermal" or beta is not None):
        cfg = ScenarioConfig(command, h, tuple(coup), tuple(refs), tuple(sorted(dens.items())),
                             kind, beta, mu, hbar, tuple(sorted(numerics.items())), init, init_idx,
                             obs, wcl_omega, wcl_density, label)
        _semantic_checks(cfg, col)
    if col.errors:
        raise ConfigError(col.errors)
    return cfg


def _semantic_checks(cfg: ScenarioConfig, col: _Collector):
    """Checks that need the constructed objects (Hermiticity, mu against supports)."""
    from .spectral import SystemSpec

    h = np.array(cfg.hamiltonian)
    if h.ndim == 2 and h.shape[0] == h.shape[1] and not np.allclose(h, h.conj().T):
        col.add("system.hamiltonian", "must be Hermitian")
        return
    try:
        spec = SystemSpec(np.array(cfg.hamiltonian), tuple(np.array(c) for c in cfg.couplings),
                          cfg.density_refs, cfg.hbar)
    except ValidationError as exc:
        col.add("system", str(exc))
        return
    d = spec.dim
    for name, m in (("initial_state.matrix", cfg.initial_state), ("observable", cfg.observable)):
        if m is not None and np.array(m).shape != (d, d):
            col.add(name, f"expected a {d}x{d} matrix")
    if cfg.initial_index is not None and not 0 <= cfg.initial_index < d:
        col.add("initial_state.basis_index", f"must lie in [0, {d - 1}]")
    densities = {}
    for lab, dc in cfg.densities:
        try:
            densities[lab] = _build_density(lab, dc)
        except ValidationError as exc:
            col.add(f"densities.{lab}", str(exc))
    if cfg.covariance == "thermal":
        from .reservoir.covariance import thermal_covariance

        for lab, dens in sorted(densities.items()):
            try:
                thermal_covariance(cfg.beta, cfg.mu, dens, cfg.hbar)
            except ValidationError as exc:
                col.add("reservoir.mu", f"density {lab!r}: {exc}")


def _build_density(lab, dc: DensityConfig):
    from .reservoir.densities import load_density_csv, preset_density

    if dc.csv is not None:
        try:
            return load_density_csv(dc.csv)
        except OSError as exc:
            raise ValidationError(f"cannot read {dc.csv}") from exc
    params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in dc.params}
    return preset_density(dc.preset, params)


def build_densities(cfg: ScenarioConfig) -> dict:
    return {lab: _build_density(lab, dc) for lab, dc in cfg.densities}


def _matrix_out(m):
    arr = np.array(m, dtype=complex)
    if np.all(arr.imag == 0):
        return arr.real.tolist()
    return {"re": arr.real.tolist(), "im": arr.imag.tolist()}


def canonical_form(cfg: ScenarioConfig) -> dict:
    """Plain-JSON document that parses back to an equal configuration."""
    doc = {
        "schema": SCHEMA,
        "system": {
            "hamiltonian": _matrix_out(cfg.hamiltonian),
            "couplings": [{"operator": _matrix_out(c), "density": r}
                          for c, r in zip(cfg.couplings, cfg.density_refs)],
            "hbar": cfg.hbar,
        },
        "densities": {},
        "reservoir": {"covariance": cfg.covariance},
        "numerics": {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.numerics},
    }
    if cfg.command is not None:
        doc["command"] = cfg.command
    for lab, dc in cfg.densities:
        if dc.csv is not None:
            doc["densities"][lab] = {"csv": dc.csv}
        else:
            doc["densities"][lab] = {"preset": dc.preset, "params": {
                k: (list(v) if isinstance(v, tuple) else v) for k, v in dc.params}}
    if cfg.covariance == "thermal":
        doc["reservoir"].update(beta=cfg.beta, mu=cfg.mu)
    if cfg.initial_state is not None:
        doc["initial_state"] = {"matrix": _matrix_out(cfg.initial_state)}
    elif cfg.initial_index is not None:
        doc["initial_state"] = {"basis_index": cfg.initial_index}
    if cfg.observable is not None:
        doc["observable"] = _matrix_out(cfg.observable)
    if cfg.wcl_omega is not None or cfg.wcl_density is not None:
        doc["wcl"] = {k: v for k, v in (("omega", cfg.wcl_omega), ("density", cfg.wcl_density))
                      if v is not None}
    return doc


def build_model(cfg: ScenarioConfig):
    """Construct the :class:`~stoclim.model.OpenSystem` described by a scenario."""
    from .model import build_open_system
    from .reservoir.covariance import thermal_covariance, vacuum_covariance
    from .reservoir.densities import Reservoir
    from .spectral import SystemSpec

    spec = SystemSpec(np.array(cfg.hamiltonian), tuple(np.array(c) for c in cfg.couplings),
                      cfg.density_refs, cfg.hbar)
    dens = build_densities(cfg)
    used = {r: dens[r] for r in cfg.density_refs}
    reservoir = Reservoir(used)
    if cfg.covariance == "thermal":
        lowest = min(used.values(), key=lambda d: d.support[0]) if used else None
        cov = thermal_covariance(cfg.beta, cfg.mu, lowest, cfg.hbar)
        for d in used.values():
            thermal_covariance(cfg.beta, cfg.mu, d, cfg.hbar)
    else:
        cov = vacuum_covariance(cfg.hbar)
    return build_open_system(spec, reservoir, cov, edge_policy=cfg.num("edge_policy"),
                             degeneracy_tol=cfg.num("degeneracy_tol"), quad_tol=cfg.num("quad_tol"))


def initial_state(cfg: ScenarioConfig, system) -> np.ndarray:
    """Configured initial state, defaulting to the highest-energy eigenstate."""
    if cfg.initial_state is not None:
        return np.array(cfg.initial_state, dtype=complex)
    idx = system.dim - 1 if cfg.initial_index is None else cfg.initial_index
    v = system.eig.basis[:, idx]
    return np.outer(v, v.conj())
