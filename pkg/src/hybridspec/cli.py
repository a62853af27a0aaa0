"""Command-line entry point: ``hybridspec {modes,simulate,sweep,peaks,fit}``.

Exit codes: 0 success, 1 configuration or input error, 2 fit did not
converge (the result is still written), 3 numerical failure.
"""
import argparse
import json
import logging
import os
import sys

import numpy as np

from . import fileio, fitting, hamiltonian as ham, presets
from .params import ConfigError, DomainError, SYSTEM_KEYS
from .spectra import MODELS, add_noise, add_sweep_noise, compute_spectrum, sweep_transmon
from .stepwise import StepwiseError, stepwise_estimate

logger = logging.getLogger("hybridspec")

EXIT_OK, EXIT_INPUT, EXIT_NOCONVERGE, EXIT_NUMERIC = 0, 1, 2, 3
FIT_MODELS = ("lorentzian", "jc", "ensemble", "stepwise")

DEFAULT_SPAN = 60.0
DEFAULT_POINTS = 2001
DEFAULT_SWEEP = 50.0
DEFAULT_STEPS = 101


class UsageError(Exception):
    """Bad command-line input that argparse cannot catch by itself."""


def _config(args):
    if args.config:
        return fileio.load_config(args.config)
    return fileio.RunConfig(presets.triple_resonance())


def _emit_text(text, out):
    if out:
        fileio.atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, out):
    _emit_text(json.dumps(obj, indent=2) + "\n", out)


def _rng(args):
    if args.noise:
        if args.seed is None:
            raise UsageError("--noise requires --seed")
        return np.random.default_rng(args.seed)
    return None


def _round(values):
    return [round(float(v), 6) for v in values]


def _plot_script(csv_path, kind):
    """A gnuplot script that renders ``csv_path``; written beside it."""
    name = os.path.basename(csv_path)
    if kind == "spectrum":
        body = ("set xlabel 'probe frequency (MHz)'\nset ylabel '|S21|^2 (dB)'\n"
                f"plot '{name}' using 1:4 with lines notitle\n")
    else:
        body = ("set xlabel 'transmon frequency (MHz)'\nset ylabel 'probe frequency (MHz)'\n"
                "set view map\nset key off\n"
                f"plot '{name}' matrix nonuniform using 2:1:3 with image\n")
    script = "set datafile separator ','\nset terminal pngcairo size 900,600\n" \
             f"set output '{os.path.splitext(name)[0]}.png'\n" + body
    path = os.path.splitext(csv_path)[0] + ".gp"
    fileio.atomic_write(path, script)
    return path


# ------------------------------------------------------------- commands

def cmd_modes(args):
    cfg = _config(args)
    p = cfg.system
    out = {
        "single_excitation": _round(ham.eigendecompose(ham.build_single_excitation(p)).eigenvalues),
        "one_photon": _round(ham.one_photon_transitions(p)),
        "two_photon": _round(ham.two_photon_transitions(p)),
    }
    _emit_json(out, args.out)
    return EXIT_OK


def _grid(args, cfg, p):
    f_min = args.f_min if args.f_min is not None else cfg.get("f_min", p.f_r - DEFAULT_SPAN)
    f_max = args.f_max if args.f_max is not None else cfg.get("f_max", p.f_r + DEFAULT_SPAN)
    n = args.points if args.points is not None else cfg.get("n_points", DEFAULT_POINTS)
    if not f_min < f_max:
        raise UsageError("probe range must satisfy f_min < f_max")
    if n < 2:
        raise UsageError("need at least 2 probe points")
    return f_min, f_max, n


def cmd_simulate(args):
    cfg = _config(args)
    p = cfg.system
    model = args.model or cfg.get("model", "tripartite")
    if model not in MODELS:
        raise UsageError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
    rng = _rng(args)
    s = compute_spectrum(model, p, *_grid(args, cfg, p))
    if rng is not None:
        s = add_noise(s, args.noise, rng)
    _emit_text(fileio.format_spectrum(s), args.out)
    if args.plot_script and args.out:
        _plot_script(args.out, "spectrum")
    return EXIT_OK


def cmd_sweep(args):
    cfg = _config(args)
    p = cfg.system
    lo = args.sweep_min if args.sweep_min is not None else cfg.get("sweep_min", p.f_s - DEFAULT_SWEEP)
    hi = args.sweep_max if args.sweep_max is not None else cfg.get("sweep_max", p.f_s + DEFAULT_SWEEP)
    steps = args.steps if args.steps is not None else cfg.get("sweep_steps", DEFAULT_STEPS)
    if steps < 1 or (steps > 1 and not lo < hi):
        raise UsageError("sweep range must satisfy sweep_min < sweep_max with steps >= 1")
    values = np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])
    f_min, f_max, n = _grid(args, cfg, p)
    hyper = args.hyperfine or cfg.get("hyperfine", False)
    rng = _rng(args)
    grid = sweep_transmon(p, values, np.linspace(f_min, f_max, n), hyperfine=hyper)
    if rng is not None:
        grid = add_sweep_noise(grid, args.noise, rng)
    if not args.out:
        raise UsageError("sweep writes two files; give --out")
    branches = args.branches or os.path.splitext(args.out)[0] + "_branches.csv"
    try:
        fileio.write_sweep(args.out, grid)
        fileio.write_branches(branches, grid)
    except BaseException:
        for path in (args.out, branches):
            if os.path.exists(path):
                os.unlink(path)
        raise
    if args.plot_script:
        _plot_script(args.out, "sweep")
    return EXIT_OK


def cmd_peaks(args):
    trace = fileio.read_spectrum(args.input)
    peaks = fitting.find_peaks(trace.spectrum, args.prominence)
    out = [{"center": round(pk.center, 6), "fwhm": round(pk.fwhm, 6),
            "amplitude": round(pk.amplitude, 6)} for pk in peaks]
    _emit_json(out, args.out)
    return EXIT_OK


def _fixed(args, cfg, default):
    if args.fixed is not None:
        names = [n.strip() for n in args.fixed.split(",") if n.strip()]
    else:
        names = cfg.get("fixed", list(default))
    for name in names:
        if name not in SYSTEM_KEYS:
            raise ConfigError(f"fixed-parameter mask names unknown key {name!r}", key="fixed")
    return tuple(names)


def cmd_fit(args):
    cfg = _config(args)
    model = args.model or cfg.get("model")
    if model not in FIT_MODELS:
        raise UsageError(f"fit model must be one of {', '.join(FIT_MODELS)}")
    if model == "stepwise":
        grid = fileio.read_sweep(args.input)
        res = stepwise_estimate(grid, cfg.system, prominence=args.prominence or 0.12)
    else:
        s = fileio.read_spectrum(args.input).spectrum
        if model == "lorentzian":
            n = args.n_peaks or cfg.get("n_peaks", 2)
            res = fitting.fit_lorentzians(s, n)
        elif model == "jc":
            res = fitting.fit_jc(s, cfg.system, fixed=_fixed(args, cfg, ("kappa",)))
        else:
            res = fitting.fit_ensemble(s, cfg.system, fixed=_fixed(args, cfg, ("kappa",)))
    _emit_json(res.to_json_dict(), args.out)
    return EXIT_OK if res.converged else EXIT_NOCONVERGE


# ------------------------------------------------------------- parser

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with a 'system' section and options")
    common.add_argument("--out", help="output path (standard output when omitted)")
    common.add_argument("--seed", type=int, help="seed for synthetic noise")
    common.add_argument("-v", "--verbose", action="store_true")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--f-min", type=float, help="lowest probe frequency (MHz)")
    grid.add_argument("--f-max", type=float, help="highest probe frequency (MHz)")
    grid.add_argument("--points", type=int, help="number of probe points")
    grid.add_argument("--noise", type=float, default=0.0,
                      help="additive noise on normalised power (needs --seed)")
    grid.add_argument("--plot-script", action="store_true",
                      help="also write a gnuplot script next to the CSV")

    parser = argparse.ArgumentParser(prog="hybridspec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("modes", parents=[common], help="mode frequencies as JSON")
    sp.set_defaults(func=cmd_modes)

    sp = sub.add_parser("simulate", parents=[common, grid], help="write a spectrum CSV")
    sp.add_argument("--model", choices=sorted(MODELS))
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", parents=[common, grid], help="transmon sweep heatmap CSV")
    sp.add_argument("--sweep-min", type=float)
    sp.add_argument("--sweep-max", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--hyperfine", action="store_true", help="five-branch overlay")
    sp.add_argument("--branches", help="branch CSV path (default <out>_branches.csv)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("peaks", parents=[common], help="detect peaks in a trace CSV")
    sp.add_argument("input")
    sp.add_argument("--prominence", type=float, default=0.05)
    sp.set_defaults(func=cmd_peaks)

    sp = sub.add_parser("fit", parents=[common], help="fit a trace or sweep CSV")
    sp.add_argument("input")
    sp.add_argument("--model", choices=FIT_MODELS)
    sp.add_argument("--fixed", help="comma-separated parameters held at the config values")
    sp.add_argument("--n-peaks", type=int, help="Lorentzian count for the lorentzian model")
    sp.add_argument("--prominence", type=float, help="peak prominence for stepwise tracking")
    sp.set_defaults(func=cmd_fit)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError, fileio.TraceFormatError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ArithmeticError, np.linalg.LinAlgError, ham.ResourceLimitError, StepwiseError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
