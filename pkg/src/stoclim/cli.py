"""Command-line batch runner.

``stoclim <command> --config <path> [--out <dir>] [--dt DT] [--lambda L ...]``

Exit codes: 0 success, 1 embedded assertion failed, 2 configuration error,
3 numerical failure.  Every run writes ``<out>/report.json``; commands with
tabular output also write CSV files next to it.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (AssertionFailure, ConfigError, ConvergenceError, EdgeError, StoclimError,
                     ValidationError)
from .report import NonFiniteError, emit_report, matrix_payload, write_trajectory
from .scenario import COMMANDS, build_model, canonical_form, initial_state, parse_config

EXIT_OK, EXIT_ASSERTION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
RATE_TOL = 1e-10


class Outputs:
    """Collects files to write so nothing lands on disk before a run completes."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.csv = []

    def trajectory(self, name, traj):
        self.csv.append((name, traj))
        return f"{name}.csv"

    def table(self, name, header, rows):
        self.csv.append((name, (header, rows)))
        return f"{name}.csv"

    def flush(self):
        for name, item in self.csv:
            path = self.dir / f"{name}.csv"
            if isinstance(item, tuple):
                emit_report(item[1], path, "csv", item[0])
            else:
                write_trajectory(item, path)


def _gram_payload(ch, g):
    return {
        "omega": ch.omega,
        "density_refs": list(ch.density_refs),
        "half_plus": matrix_payload(g.half_plus),
        "half_minus": matrix_payload(g.half_minus),
        "full_plus": matrix_payload(g.full_plus),
        "full_minus": matrix_payload(g.full_minus),
        "error_half_plus": g.error_half_plus,
        "error_half_minus": g.error_half_minus,
        "warnings": list(g.warnings),
    }


def cmd_coefficients(cfg, sysm, out):
    from .reservoir.gram import gram_identity_residual

    return {"channels": [dict(_gram_payload(c, g), identity_residual=gram_identity_residual(g))
                         for c, g in zip(sysm.channels, sysm.grams)]}


def cmd_generator(cfg, sysm, out):
    from .lindblad import generator_heisenberg

    gen = sysm.generator
    unit = float(np.linalg.norm(generator_heisenberg(gen, np.eye(gen.dim))))
    res = {"drift": matrix_payload(gen.drift), "gamma": matrix_payload(gen.gamma),
           "lamb_shift": matrix_payload(gen.lamb_shift), "invariants": gen.invariant_residuals(),
           "unit_residual": unit}
    if unit > 1e-10:
        raise AssertionFailure(f"L0(1) = {unit:.3e} exceeds 1e-10", res)
    return res


def cmd_master(cfg, sysm, out):
    from .lindblad import evolve_master

    traj = evolve_master(sysm.generator, initial_state(cfg, sysm), cfg.num("t_final"),
                         cfg.num("dt"), cfg.num("stride"))
    return {"trajectory": out.trajectory("master", traj), "trace_drift": traj.trace_drift(),
            "min_eigenvalue": traj.min_eigenvalue, "final_state": matrix_payload(traj.final),
            "frame": "interaction"}


def cmd_heisenberg(cfg, sysm, out):
    from .lindblad import evolve_heisenberg

    if cfg.observable is None:
        raise ConfigError([("observable", "required for the heisenberg command")])
    traj = evolve_heisenberg(sysm.generator, np.array(cfg.observable), cfg.num("t_final"),
                             cfg.num("dt"), cfg.num("stride"))
    return {"trajectory": out.trajectory("heisenberg", traj),
            "final_observable": matrix_payload(traj.final)}


def cmd_golden_rule(cfg, sysm, out):
    from .lindblad import rate_table, survival_decay_rate

    basis = sysm.eig.basis
    rates = rate_table(sysm.generator, basis)
    rows, worst = [], 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for a in range(sysm.dim):
            sr = survival_decay_rate(sysm.generator, basis[:, a])
            # survival derivative plus outgoing rates; a zero-frequency self
            # coupling contributes to both sides identically
            balance = sr.exact + float(np.sum(rates[a]))
            worst = max(worst, abs(balance))
            rows.append({"state": a, "energy": float(sysm.eig.energies[a]), "survival_rate": sr.exact,
                         "linewidth_rate": sr.linewidth, "zero_frequency": sr.zero_frequency,
                         "balance": balance})
    upward = 0.0
    if sysm.cov.is_vacuum:
        e = sysm.eig.energies
        for a in range(sysm.dim):
            for b in range(sysm.dim):
                if e[b] > e[a] + 1e-9 * (1 + abs(e).max()):
                    upward = max(upward, abs(rates[a, b]))
    res = {"rates": rates, "states": rows, "max_balance": worst, "max_vacuum_upward_rate": upward}
    if worst > RATE_TOL or upward != 0.0:
        raise AssertionFailure("rate conservation or vacuum detailed balance violated", res)
    return res


def cmd_stationary(cfg, sysm, out):
    from .lindblad import stationary_multiplicity, stationary_state

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = stationary_state(sysm.generator)
    res = {"state": matrix_payload(s), "multiplicity": stationary_multiplicity(sysm.generator)}
    pops = np.real(np.diag(sysm.eig.basis.conj().T @ s @ sysm.eig.basis))
    res["eigenbasis_populations"] = pops
    if not sysm.cov.is_vacuum:
        e = sysm.eig.energies
        gibbs = np.exp(-sysm.cov.beta * (e - e.min()))
        res["gibbs_populations"] = gibbs / gibbs.sum()
    return res


def cmd_wcl(cfg, sysm, out):
    from .wcl import CollectiveQuery, convergence_scan

    dens = sysm.reservoir.diagonal
    label = cfg.wcl_density or (sysm.spec.density_refs[0] if sysm.spec.density_refs else None)
    if label is None:
        raise ConfigError([("wcl.density", "no density to scan")])
    density = dens[label] if label in dens else None
    if density is None:
        from .scenario import build_densities

        density = build_densities(cfg)[label]
    omega = cfg.wcl_omega
    if omega is None:
        pos = [c.omega for c in sysm.channels if c.omega > 0]
        if not pos:
            raise ConfigError([("wcl.omega", "no positive Bohr frequency to default to")])
        omega = max(pos)
    lambdas = cfg.num("lambdas")
    tables = {}
    failure = None
    orderings = ("annihilator-first",) if sysm.cov.is_vacuum else ("annihilator-first", "creator-first")
    for ordering in orderings:
        q = CollectiveQuery(lambdas[0], cfg.num("wcl_t"), cfg.num("wcl_s"), omega, density,
                            sysm.cov, ordering=ordering)
        rows = convergence_scan(q, lambdas, raise_on_failure=False)
        name = "wcl_scan" if ordering == "annihilator-first" else "wcl_scan_reversed"
        out.table(name, ["lambda", "re", "im", "abs_error"],
                  [[r.lam, r.value.real, r.value.imag, r.abs_error] for r in rows])
        tables[ordering] = [{"lambda": r.lam, "value": r.value, "abs_error": r.abs_error,
                             "quadrature_error": r.quad_error} for r in rows]
        bad = [r.lam for a, r in zip(rows, rows[1:]) if r.abs_error > 1.05 * a.abs_error]
        if bad and failure is None:
            failure = ConvergenceError(f"{ordering}: errors grew at couplings {bad}", rows)
    res = {"omega": omega, "density": label, "scans": tables}
    if failure is not None:
        raise AssertionFailure(str(failure), res)
    return res


def cmd_qsde(cfg, sysm, out):
    from .lindblad import Trajectory
    from .qsde import (build_slice_for, evolve_reduced, ito_table_check, master_reference,
                       trajectory_deviation, unitarity_defect)

    gen, dt = sysm.generator, cfg.num("dt")
    stepper = cfg.num("stepper")
    sl = build_slice_for(gen, cfg.num("n_max"))
    s0 = initial_state(cfg, sysm)
    ito = ito_table_check(sl, sysm.grams, dt, raise_on_failure=False)
    red = evolve_reduced(sl, gen, s0, cfg.num("t_final"), dt, stepper, cfg.num("stride"))
    # exact propagation of the master equation at the same sample times
    mas = Trajectory(red.times.copy(), master_reference(gen, s0, red.times), meta={"frame": "interaction"})
    dev = trajectory_deviation(red, mas.states)
    res = {
        "qsde_trajectory": out.trajectory("qsde", red),
        "master_trajectory": out.trajectory("master", mas),
        "max_deviation": dev,
        "stepper": stepper,
        "slice_modes": sl.modes,
        "ito_max_deviation": ito.max_deviation,
        "isometry_defect": unitarity_defect(sl, gen, dt, stepper, "isometry"),
        "unitarity_defect_full": unitarity_defect(sl, gen, dt, stepper, "full"),
        "max_step_trace_defect": red.meta["max_step_trace_defect"],
        "clipped_mass": sum(f.clipped_mass for f in sl.factorizations),
    }
    if not ito.passed:
        raise AssertionFailure("Ito table identities violated", res)
    return res


def cmd_degeneracy(cfg, sysm, out):
    from .spectral import (classify_brute_force, classify_degeneracies, hydrogen_degeneracy_search,
                           hydrogen_search_exact)

    rep = classify_degeneracies(sysm.eig, cfg.num("degeneracy_tol"))
    fast = rep.labels()
    brute = classify_brute_force(sysm.eig.energies, cfg.num("degeneracy_tol"))
    mismatch = sorted(p for p in brute if fast.get(p) != brute[p])
    res = {"classes": [{"omega": w, "members": [{"pair": list(p), "label": lab} for p, lab in m]}
                       for w, m in sorted(rep.classes.items())],
           "mismatches": [list(p) for p in mismatch]}
    n_max = cfg.num("hydrogen_n_max")
    if n_max:
        hits = hydrogen_degeneracy_search(n_max)
        exact = hydrogen_search_exact(n_max)
        res["hydrogen"] = {"n_max": n_max, "coincidences": [list(h) for h in hits],
                           "agrees_with_exact": hits == exact}
        if hits != exact:
            raise AssertionFailure("hydrogen search disagrees with exact rational check", res)
    if mismatch:
        raise AssertionFailure("degeneracy labels disagree with exhaustive enumeration", res)
    return res


def cmd_oracle_audit(cfg, sysm, out):
    from .lindblad import generator_heisenberg
    from .oracles import w_identity_check, half_line_time_oracle, second_order_oracle

    tol = cfg.num("oracle_tol")
    gen = sysm.generator
    res = {"w_identities": [], "second_order": [], "time_oracle": []}
    failures = []
    for ch, g in zip(sysm.channels, sysm.grams):
        try:
            r = w_identity_check(ch, sysm.reservoir, sysm.cov, g, tol)
        except AssertionFailure as exc:
            r = exc.details
            failures.append(f"w identities at omega={ch.omega}")
        res["w_identities"].append({"omega": ch.omega, "families": r})
        for j, ref in enumerate(ch.density_refs):
            dens = sysm.reservoir.density(ref, ref)
            for sign in ((1,) if sysm.cov.is_vacuum else (1, -1)):
                o = half_line_time_oracle(dens, sysm.cov, ch.omega, sign)
                main = g.half(sign)[j, j]
                dev = abs(o.value - main)
                res["time_oracle"].append({"omega": ch.omega, "index": j, "sign": sign,
                                           "value": main, "oracle": o.value,
                                           "oracle_error": o.error, "deviation": dev})
                if dev > tol * max(1.0, abs(main)) + o.error:
                    failures.append(f"time oracle at omega={ch.omega}, index {j}, sign {sign}")
    for a in range(sysm.dim):
        phi = sysm.eig.basis[:, a]
        o = second_order_oracle(sysm.channels, sysm.reservoir, sysm.cov, phi)
        y = complex(np.vdot(phi, gen.drift @ phi))
        dev = abs(y - o.value)
        res["second_order"].append({"state": a, "drift": y, "oracle": o.value,
                                    "oracle_error": o.error, "deviation": dev})
        if dev > tol * max(abs(o.value), 1e-300) + o.error:
            failures.append(f"second-order shift of state {a}")
    unit = float(np.linalg.norm(generator_heisenberg(gen, np.eye(gen.dim))))
    res["unit_residual"] = unit
    if unit > 1e-10:
        failures.append("L0(1)")
    res["failures"] = failures
    if failures:
        raise AssertionFailure(f"{len(failures)} oracle checks failed", res)
    return res


HANDLERS = {
    "coefficients": cmd_coefficients,
    "generator": cmd_generator,
    "master": cmd_master,
    "heisenberg": cmd_heisenberg,
    "golden-rule": cmd_golden_rule,
    "stationary": cmd_stationary,
    "wcl-converge": cmd_wcl,
    "qsde-compare": cmd_qsde,
    "degeneracy": cmd_degeneracy,
    "oracle-audit": cmd_oracle_audit,
}


def _failure(kind, exc, details=None):
    out = {"status": "failed", "error": {"kind": kind, "type": type(exc).__name__,
                                          "message": str(exc)}}
    if details:
        out["error"]["details"] = details
    return out


def _safe_details(details):
    """Keep failure details only if they serialize cleanly."""
    from .report import to_json

    try:
        to_json(details)
        return details
    except (NonFiniteError, ValidationError):
        return {"note": "details contained non-serializable or non-finite values"}


def run_scenario(cfg, out_dir) -> int:
    """Run one scenario and write its report; returns the exit code."""
    out = Outputs(out_dir)
    report_path = Path(out_dir) / "report.json"
    command = cfg.command
    base = {"command": command, "version": __version__, "config": canonical_form(cfg)}
    try:
        sysm = build_model(cfg)
        result = HANDLERS[command](cfg, sysm, out)
        payload = dict(base, status="ok", result=result)
        emit_report(payload, report_path)
        out.flush()
        return EXIT_OK
    except AssertionFailure as exc:
        code, rep = EXIT_ASSERTION, _failure("assertion", exc, _safe_details(exc.details))
    except ConfigError as exc:
        code, rep = EXIT_CONFIG, _failure("config", exc, {"errors": [list(e) for e in exc.errors]})
    except NonFiniteError as exc:
        code, rep = EXIT_NUMERIC, _failure("numerical", exc, {"path": exc.path})
    except (EdgeError, ValidationError) as exc:
        code, rep = EXIT_CONFIG, _failure("config", exc)
    except StoclimError as exc:
        code, rep = EXIT_NUMERIC, _failure("numerical", exc)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        code, rep = EXIT_NUMERIC, _failure("numerical", exc)
    emit_report(dict(base, **rep), report_path)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stoclim", description="Weak-coupling limit toolkit for open quantum systems.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--dt", type=float, help="override numerics.dt")
    p.add_argument("--t-final", dest="t_final", type=float, help="override numerics.t_final")
    p.add_argument("--lambda", dest="lambdas", type=float, nargs="+", help="override numerics.lambdas")
    p.add_argument("--version", action="version", version=f"stoclim {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        doc = canonical_form(cfg)
        doc["command"] = args.command
        for key in ("dt", "t_final", "lambdas"):
            v = getattr(args, key)
            if v is not None:
                doc["numerics"][key] = v
        cfg = parse_config(doc, base_dir=Path(args.config).parent)
    except ConfigError as exc:
        for path, msg in exc.errors:
            print(f"config error: {path or '<root>'}: {msg}", file=sys.stderr)
        emit_report({"command": args.command, "version": __version__, "status": "failed",
                     "error": {"kind": "config", "type": "ConfigError",
                               "errors": [list(e) for e in exc.errors]}},
                    Path(args.out) / "report.json")
        return EXIT_CONFIG
    code = run_scenario(cfg, args.out)
    if code != EXIT_OK:
        print(f"stoclim {args.command}: failed with exit code {code}; see {Path(args.out) / 'report.json'}",
              file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
