"""Command-line experiment runner.

One experiment per invocation: parse the config, run the module code,
write the declared CSV/report files into the output directory, then the
manifest (always last, so a manifest marks a completed run).  Exit 0 on
success, 1 when inputs fail validation, 2 when the numerics give out
(blow-up, non-convergence, singular systems).

All experiments run single-threaded; NLWAVE_THREADS is accepted and
validated as a worker cap but no experiment currently needs more than
one worker to stay inside it.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__, config, continuum, dynamics, instability
from . import linalg, lyapunov, manifest
from .errors import NumericalError, ValidationError

IDENTITY_TOL = 1e-9


def _fmt(value) -> str:
    return format(float(value), ".17g")


def _write_csv(path, header: str, columns) -> None:
    cols = [np.asarray(c) for c in columns]
    n = cols[0].shape[0]
    for c in cols:
        if c.shape != (n,):
            raise ValidationError("csv columns must share one length")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(c[i]) for c in cols) + "\n")


def _write_report(path, items) -> None:
    """Flat name=value lines; booleans lowercase, sequences space-joined."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in items:
            if value is None:
                text = "none"
            elif isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, (int, np.integer)):
                text = str(int(value))
            elif isinstance(value, (float, np.floating)):
                text = _fmt(value)
            elif isinstance(value, (list, tuple, np.ndarray)):
                text = " ".join(_fmt(v) for v in value)
            else:
                text = str(value)
            fh.write(f"{key}={text}\n")


def write_outputs(out_dir, planned) -> list:
    """Run the writers in order; name the completed files if one fails."""
    done = []
    for name, writer in planned:
        try:
            writer(os.path.join(out_dir, name))
        except OSError as exc:
            completed = ", ".join(done) if done else "none"
            raise ValidationError(
                f"failed writing {name} (completed: {completed}): {exc}"
            ) from None
        done.append(name)
    return done


def _thread_cap() -> int:
    raw = os.environ.get("NLWAVE_THREADS")
    if raw is None:
        return 1
    try:
        cap = int(raw)
    except ValueError:
        raise ValidationError(
            f"NLWAVE_THREADS must be an integer, got {raw!r}"
        ) from None
    if cap < 1:
        raise ValidationError(f"NLWAVE_THREADS must be at least 1, got {cap}")
    return cap


def _model_state_cfg(cfg):
    model = config.build_model(cfg)
    state = config.build_state(cfg, model.space)
    return model, state, config.build_integrator(cfg)


def _run_simulate(cfg, out_dir):
    model, state, icfg = _model_state_cfg(cfg)
    with_detm = cfg.experiment["record_detm"]
    rec = dynamics.evolve(state, model, icfg, record_detm=with_detm)
    header = "t,spin,energy,norm"
    columns = [rec.times, rec.spin, rec.energy, rec.norm]
    if with_detm:
        header += ",detM"
        columns.append(rec.detm)
    return write_outputs(out_dir, [
        ("trajectory.csv", lambda p: _write_csv(p, header, columns)),
    ])


def _run_diverge(cfg, out_dir):
    model, state, icfg = _model_state_cfg(cfg)
    series = lyapunov.divergence_series(
        state, model, icfg,
        index=cfg.experiment["index"], epsilon=cfg.experiment["epsilon"],
    )
    return write_outputs(out_dir, [
        ("divergence.csv",
         lambda p: _write_csv(p, "t,log_dev", [series.times, series.log_dev])),
    ])


def _run_mlce(cfg, out_dir):
    model, state, icfg = _model_state_cfg(cfg)
    series = lyapunov.mlce_series(
        state, model, icfg, seed=cfg.run["seed"],
        renorm_interval=cfg.experiment["renorm_interval"],
    )
    estimate = lyapunov.mlce_estimate(
        series, tail_fraction=cfg.experiment["tail_fraction"]
    )
    report = [
        ("gamma_hat", estimate),
        ("tail_fraction", cfg.experiment["tail_fraction"]),
        ("seed", series.seed),
        ("renorm_interval", series.renorm_interval),
        ("checkpoints", series.times.shape[0]),
    ]
    return write_outputs(out_dir, [
        ("mlce.csv",
         lambda p: _write_csv(p, "t,gamma", [series.times, series.gamma])),
        ("mlce.txt", lambda p: _write_report(p, report)),
    ])


def _run_wscan(cfg, out_dir):
    model, state, icfg = _model_state_cfg(cfg)
    exp = cfg.experiment
    if exp["points"] < 1:
        raise ValidationError(f"wscan needs points >= 1, got {exp['points']}")
    if not exp["w_min"] <= exp["w_max"]:
        raise ValidationError(
            f"wscan needs w_min <= w_max, got [{exp['w_min']}, {exp['w_max']}]"
        )
    grid = np.linspace(exp["w_min"], exp["w_max"], exp["points"])
    rows = lyapunov.w_scan(state, model, grid, icfg, cfg.run["seed"])
    for row in rows:
        if row.error is not None:
            print(f"nlwave wscan: w={row.w:g}: {row.error}", file=sys.stderr)
    return write_outputs(out_dir, [
        ("wscan.csv", lambda p: _write_csv(
            p, "w,gamma_hat,detM_sign",
            [[r.w for r in rows], [r.gamma_hat for r in rows],
             [r.detm_sign for r in rows]],
        )),
    ])


def _run_dci_series(cfg, out_dir):
    model, state, icfg = _model_state_cfg(cfg)
    times, detm = instability.dci_time_series(state, model, icfg)
    return write_outputs(out_dir, [
        ("dci_series.csv", lambda p: _write_csv(p, "t,detM", [times, detm])),
    ])


def _run_theorem3(cfg, out_dir):
    model, state, _ = _model_state_cfg(cfg)
    report = instability.theorem3_predict(state, model.space)
    return write_outputs(out_dir, [
        ("theorem3.txt", lambda p: _write_report(p, sorted(report.items()))),
    ])


def _run_wstar(cfg, out_dir):
    model, state, _ = _model_state_cfg(cfg)
    exp = cfg.experiment
    res = instability.wstar_search(
        state, model, w_max=exp["w_max"], tol=exp["tol"],
        grid_points=exp["grid_points"],
    )
    report = [
        ("w_star", res.w_star),
        ("crossings", res.crossings),
        ("w_max", res.w_max),
        ("tol", res.tol),
        ("grid_points", res.grid_points),
    ]
    return write_outputs(out_dir, [
        ("wstar.txt", lambda p: _write_report(p, report)),
    ])


def _run_continuum(cfg, out_dir):
    exp = cfg.experiment
    params = continuum.ContinuumParams(
        n_bodies=exp["n_bodies"], mass=exp["mass"], spring=exp["spring"],
        w=exp["w"], sigma=exp["sigma"], epsilon=exp["epsilon"],
    )
    op = continuum.build_omega(params, exp["degree_cap"])
    s_value = exp["s_value"]
    if s_value == 0.0:
        basis = continuum.parity_subset(op.basis, exp["parity"])
    else:
        basis = op.basis
    coeffs = continuum.example_coeffs(basis, params.n_bodies)
    report = continuum.criteria_check(params, coeffs, s_value, op=op)
    if s_value == 0.0:
        report["scenario"] = "A"
        report["parity"] = exp["parity"]
    items = sorted(report.items())
    items.append(("operator_norm", continuum.operator_norm(op)))
    items.append(("basis_size", len(op.basis)))
    items.append(("degree_cap", exp["degree_cap"]))
    if params.n_bodies <= 4:
        internals = continuum.quartic_bound_report(params, s_value)
        internals.pop("a_matrix")
        items.extend((f"internals_{k}", v) for k, v in sorted(internals.items()))
    planned = [("criteria.txt", lambda p: _write_report(p, items))]
    if exp["dump_operator"]:
        planned.append(("operator.csv",
                        lambda p: continuum.write_operator_csv(op, p)))
        planned.append(("basis_legend.csv",
                        lambda p: continuum.write_basis_legend(op, p)))
    return write_outputs(out_dir, planned)


def _run_identities(cfg, out_dir):
    exp = cfg.experiment
    report = linalg.run_identity_suite(
        seed=exp["seed"], trials=exp["trials"], max_size=exp["max_size"]
    )
    files = write_outputs(out_dir, [
        ("identities.txt", lambda p: _write_report(p, sorted(report.items()))),
    ])
    worst = max(v for k, v in report.items() if k != "trials")
    if worst > IDENTITY_TOL:
        raise NumericalError(
            f"identity suite residual {worst:.3e} exceeds {IDENTITY_TOL:g}"
        )
    return files


_HANDLERS = {
    "simulate": _run_simulate,
    "diverge": _run_diverge,
    "mlce": _run_mlce,
    "wscan": _run_wscan,
    "dci-series": _run_dci_series,
    "theorem3": _run_theorem3,
    "wstar": _run_wstar,
    "continuum": _run_continuum,
    "identities": _run_identities,
}


def run(experiment: str, config_path=None, overrides=(), out_dir=None):
    """Execute one experiment; returns (exit status, written files)."""
    start = time.monotonic()
    try:
        _thread_cap()
        if config_path is not None:
            cfg = config.load_config(config_path, experiment, overrides)
        else:
            cfg = config.parse_config("", experiment, overrides)
        dest = out_dir if out_dir is not None else cfg.run["out"]
        try:
            os.makedirs(dest, exist_ok=True)
        except OSError as exc:
            raise ValidationError(
                f"cannot create output directory {dest}: {exc}"
            ) from None
        files = _HANDLERS[experiment](cfg, dest)
        resolved = cfg.sections()
        resolved["run"]["out"] = dest
        manifest.write_manifest(
            dest, resolved, files, time.monotonic() - start, __version__
        )
        return 0, files + [manifest.MANIFEST_NAME]
    except ValidationError as exc:
        print(f"nlwave {experiment}: {exc}", file=sys.stderr)
        return 1, []
    except NumericalError as exc:
        print(f"nlwave {experiment}: {exc}", file=sys.stderr)
        return 2, []


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlwave",
        description="Run one wavefunction-model experiment and write CSV "
                    "outputs plus a reproducibility manifest.",
    )
    parser.add_argument("experiment", choices=config.EXPERIMENTS,
                        help="which experiment to run")
    parser.add_argument("--config", default=None, metavar="PATH",
                        help="TOML config file (defaults apply without one)")
    parser.add_argument("--set", action="append", default=[],
                        dest="overrides", metavar="SECTION.KEY=VALUE",
                        help="override one resolved config value")
    parser.add_argument("--out", default=None, metavar="DIR",
                        help="output directory (overrides run.out)")
    args = parser.parse_args(argv)
    status, _ = run(args.experiment, args.config, args.overrides, args.out)
    return status


if __name__ == "__main__":
    sys.exit(main())
