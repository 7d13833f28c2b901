"""Command-line entry point: ``omit-cool <task> --config FILE --out DIR``.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 instability.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .config import TASKS, ConfigError, RunConfig, load_config, read_recipe, recipe_names
from .core import InstabilityError, IntegrationError, OmitCoolError, PhysicalityError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_UNSTABLE = 0, 2, 3, 4
log = logging.getLogger("omit_cool")


class _Unstable(Exception):
    """Run finished but the dynamics diverged; artifacts are still written."""


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def _tones(cfg: RunConfig):
    if cfg.tones is not None:
        return cfg.tones, None
    from .meanfield import solve_mean_field
    tones, delta_om = solve_mean_field(cfg.params, cfg.drives, **cfg.meanfield)
    return tones, delta_om


def _run_spectrum(cfg, out):
    from .response import spectrum
    o = cfg.options
    grid = np.asarray(o["grid"]) if "grid" in o else np.linspace(o["omega_min"], o["omega_max"],
                                                                 o["points"])
    tones, _ = _tones(cfg)
    spectrum(grid, cfg.params, tones).to_csv(out / "spectrum.csv")
    return ["spectrum.csv"]


def _run_rates(cfg, out):
    from .rates import rates
    tones, _ = _tones(cfg)
    rates(cfg.params, tones).to_json(out / "rates.json")
    return ["rates.json"]


def _tail_average(traj, cfg, tones):
    # mean of n_b over the last window if the last two windows agree
    from .dynamics import beat_period
    W = cfg.controls.window_periods * beat_period(cfg.params, tones)
    t = traj.t
    if t[-1] - t[0] < 2 * W:
        return None
    means = []
    for lo, hi in ((t[-1] - 2 * W, t[-1] - W), (t[-1] - W, t[-1])):
        sel = (t >= lo) & (t <= hi)
        if sel.sum() < 2:
            return None
        means.append(float(np.trapezoid(traj.n_b[sel], t[sel]) / (t[sel][-1] - t[sel][0])))
    if abs(means[1] - means[0]) <= cfg.controls.window_rtol * abs(means[1]):
        return means[1]
    return None


def _run_evolve(cfg, out):
    from .dynamics import MomentState, evolve, periodic_steady_state
    o = cfg.options
    tones, _ = _tones(cfg)
    init = o.get("initial", {})
    state = MomentState.thermal(cfg.params, n_a=init.get("n_a", 0.0), n_b=init.get("n_b"),
                                n_c=init.get("n_c"))
    try:
        traj = evolve(cfg.params, tones, state, o["t_end"], o["output_stride"], cfg.controls)
    except (IntegrationError, PhysicalityError) as exc:
        if getattr(exc, "trajectory", None) is not None:
            exc.trajectory.to_csv(out / "trajectory.csv")
        raise
    traj.converged_tail = None if traj.diverged else _tail_average(traj, cfg, tones)
    traj.to_csv(out / "trajectory.csv")
    summary = traj.summary()
    if o.get("periodic_check") and not traj.diverged:
        try:
            summary["periodic_steady_state"] = periodic_steady_state(cfg.params, tones).to_dict()
        except InstabilityError as exc:
            summary["periodic_steady_state"] = {"error": str(exc)}
    _write_json(out / "evolve.json", summary)
    if traj.diverged:
        raise _Unstable(f"moments diverged at t = {traj.final.t:.6g}")
    return ["trajectory.csv", "evolve.json"]


def _run_oracle(cfg, out):
    from .oracle import FockConfig, compare
    o = cfg.options
    tones, _ = _tones(cfg)
    keys = ("max_step", "rtol", "atol", "dim_budget", "tail_tol")
    fock = FockConfig(tuple(o["dims"]), o["t_end"], output_stride=o["output_stride"],
                      **{k: o[k] for k in keys if k in o})
    result = compare(cfg.params, tones, fock, tuple(o["occupations"]))
    result.to_csv(out / "oracle_check.csv")
    result.to_json(out / "oracle_check.json")
    return ["oracle_check.csv", "oracle_check.json"]


def _run_sweep(cfg, out, workers):
    from .sweep import CascadeTemplate, make_axis, sweep_cooling_limit, sweep_gamma_opt
    o = cfg.options
    c = cfg.cascade
    template = CascadeTemplate(tuple(c["alphas"]), c.get("delta_0_over_omega_m", 1.0),
                               c.get("delta_0_prime"))
    ax = o["axis"]
    axis = make_axis(ax["start"], ax["stop"], ax["num"], ax["spacing"]) if isinstance(ax, dict) \
        else np.asarray(ax)
    if o["kind"] == "cooling_limit":
        result = sweep_cooling_limit(cfg.params, template, axis, o["mode"], o["verify_points"],
                                     workers, cfg.controls, o["hold_quality"], o["scale_n_c_th"],
                                     o["check_stability"])
    else:
        result = sweep_gamma_opt(cfg.params, axis, o["with_control"], template, workers,
                                 o["hold_quality"], o["scale_n_c_th"], o["check_stability"])
    result.provenance = cfg.resolved
    result.to_csv(out / "sweep.csv")
    result.to_json(out / "sweep.json")
    return ["sweep.csv", "sweep.json"]


def _run_meanfield(cfg, out):
    tones, delta_om = _tones(cfg)
    _write_json(out / "meanfield.json", {"delta_om": delta_om, "tones": tones.to_list(),
                                         "drives": [d.to_dict() for d in cfg.drives]})
    return ["meanfield.json"]


def execute(cfg: RunConfig, out: Path, workers=None):
    """Run the configured task, writing artifacts and ``manifest.json`` into ``out``.

    Artifacts are produced in a scratch directory next to ``out`` and moved
    into place afterwards, so ``out`` never holds a file that is still being
    written. A numerical failure still delivers whatever the run produced
    (for example a partial trajectory) together with a manifest recording
    the status. Returns the exit code.
    """
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".omit-cool-", dir=out.parent))
    status, code, message = "ok", EXIT_OK, None
    try:
        runner = {"spectrum": _run_spectrum, "rates": _run_rates, "evolve": _run_evolve,
                  "oracle-check": _run_oracle, "meanfield": _run_meanfield}
        if cfg.task == "sweep":
            _run_sweep(cfg, stage, workers)
        else:
            runner[cfg.task](cfg, stage)
    except (_Unstable, InstabilityError) as exc:
        status, code, message = "unstable", EXIT_UNSTABLE, str(exc)
    except OmitCoolError as exc:
        status, code, message = "numerical failure", EXIT_NUMERIC, str(exc)
    artifacts = sorted(p.name for p in stage.iterdir())
    manifest = dict(cfg.resolved)
    manifest["provenance"] = {"omit_cool_version": __version__, "status": status,
                              "message": message, "artifacts": artifacts}
    _write_json(stage / "manifest.json", manifest)
    out.mkdir(parents=True, exist_ok=True)
    for item in stage.iterdir():
        shutil.move(str(item), str(out / item.name))
    stage.rmdir()
    if message:
        log.error("%s: %s", status, message)
    return code


def _parser():
    parser = argparse.ArgumentParser(prog="omit-cool", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"omit-cool {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run",) + TASKS:
        p = sub.add_parser(name, help="run any config" if name == "run" else f"run a {name} config")
        p.add_argument("--config", required=True,
                       help="config file path or bundled recipe name")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes for sweeps (default $OMIT_COOL_WORKERS or 1)")
        p.add_argument("--verbose", action="store_true")
    r = sub.add_parser("recipes", help="list bundled recipes or print one")
    r.add_argument("name", nargs="?")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "recipes":
        if args.name:
            try:
                print(json.dumps(read_recipe(args.name), indent=2))
            except ConfigError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
        else:
            print("\n".join(recipe_names()))
        return EXIT_OK

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command != "run" and cfg.task != args.command:
            raise ConfigError(f"config task is {cfg.task!r}, not {args.command!r}")
        workers = args.workers
        if workers is None and "OMIT_COOL_WORKERS" in os.environ:
            workers = int(os.environ["OMIT_COOL_WORKERS"])
        if workers is not None and workers < 1:
            raise ConfigError("--workers must be >= 1")
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.output or "omit-cool-out")
    log.info("running %s into %s", cfg.task, out)
    return execute(cfg, out, workers)


if __name__ == "__main__":
    sys.exit(main())
