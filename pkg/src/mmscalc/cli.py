"""Command line driver: build spaces, validate metrics, run suites.

Verbs:

    mms space build --grid 64x64 --out s.mms
    mms check metric s.mms
    mms run <experiment> [...] [--config run.ini] [--set key=value] [flags]
    mms list

Run configs are INI files with an [experiment] section for runner
settings (seed, jobs, out) and a [params] section for suite parameters;
command line flags override file values.  The MMS_SEED environment
variable supplies the seed when neither a flag nor the file sets one.
Exit codes: 0 all assertions pass, 1 an assertion failed, 2 the
configuration was rejected.  Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys

from .experiments import (ConfigError, EXPERIMENTS, list_experiments,
                          run_suite, write_artifacts)
from .norms import norm_from_string
from .spaces import (build_euclidean_grid, load_space, save_space,
                     validate_metric)

_RUNNER_KEYS = ("seed", "jobs", "out")
_PARAM_FLAGS = ("model", "K", "N", "p", "q", "spacing", "tau", "grid", "tol")


def _fail(message, code):
    print("mms: %s" % message, file=sys.stderr)
    return code


def _parse_dims(text):
    try:
        dims = [int(p) for p in str(text).lower().split("x")]
    except ValueError as exc:
        raise ConfigError("bad grid spec %r" % text) from exc
    if not dims or any(d < 2 for d in dims):
        raise ConfigError("grid dims must all be >= 2, got %r" % text)
    return dims


def _cmd_space_build(args):
    try:
        dims = _parse_dims(args.grid)
        norm = norm_from_string(args.norm, d=len(dims)) if args.norm else None
        space = build_euclidean_grid(dims, args.spacing, norm=norm)
    except (ConfigError, ValueError) as exc:
        return _fail(str(exc), 2)
    try:
        save_space(space, args.out)
    except OSError as exc:
        return _fail("cannot write %r: %s" % (args.out, exc), 2)
    print("wrote %s  (n=%d, spacing=%g)" % (args.out, space.n, args.spacing))
    return 0


def _cmd_check_metric(args):
    try:
        space = load_space(args.path)
    except (OSError, ValueError, KeyError) as exc:
        return _fail("cannot load %r: %s" % (args.path, exc), 2)
    rep = validate_metric(space, tol=args.tol, sample_triples=args.sample,
                          seed=args.seed)
    for key in ("mode", "checked_triples", "sym_max", "diag_max", "neg_min",
                "tri_min"):
        print("%s %s = %s" % (args.path, key, rep[key]))
    if rep["ok"]:
        print("%s: metric ok (n=%d)" % (args.path, space.n))
        return 0
    print("mms: metric axioms violated beyond tol=%g" % args.tol,
          file=sys.stderr)
    return 1


def _read_run_config(path):
    """INI file -> (runner settings, suite params), both string-valued."""
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError("cannot read config %r: %s" % (path, exc)) from exc
    except configparser.Error as exc:
        raise ConfigError("bad config %r: %s" % (path, exc)) from exc
    runner = {}
    params = {}
    for section in parser.sections():
        if section == "experiment":
            for key, value in parser.items(section):
                if key not in _RUNNER_KEYS:
                    raise ConfigError(
                        "unknown [experiment] key %r in %s" % (key, path))
                runner[key] = value
        elif section == "params":
            params.update(parser.items(section))
        else:
            raise ConfigError("unknown config section [%s] in %s"
                              % (section, path))
    return runner, params


def _resolve_seed(flag_value, file_value):
    if flag_value is not None:
        return flag_value
    if file_value is not None:
        try:
            return int(file_value)
        except ValueError as exc:
            raise ConfigError("bad seed %r in config file" % file_value) from exc
    env = os.environ.get("MMS_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError("bad MMS_SEED value %r" % env) from exc
    return 0


def _cmd_run(args):
    try:
        runner, params = ({}, {})
        if args.config:
            runner, params = _read_run_config(args.config)
        for item in args.set or []:
            key, sep, value = item.partition("=")
            if not sep or not key:
                raise ConfigError("--set needs key=value, got %r" % item)
            params[key.strip()] = value.strip()
        for flag in _PARAM_FLAGS:
            value = getattr(args, flag, None)
            if value is not None:
                params[flag] = value
        names = list(args.experiments)
        if names == ["all"]:
            names = list_experiments()
        seed = _resolve_seed(args.seed, runner.get("seed"))
        jobs = args.jobs if args.jobs is not None else int(runner.get("jobs", 1))
        out = args.out or runner.get("out") or "mms-report"
        results = run_suite(names, params, seed=seed, jobs=jobs,
                            strict=len(names) == 1)
    except ConfigError as exc:
        return _fail(str(exc), 2)
    except ValueError as exc:
        return _fail(str(exc), 2)
    report = write_artifacts(results, out, seed=seed)
    for res in results:
        for name, ok, residual, tolerance in res.assertions:
            print("%s  %s: %s  (residual %.6g, tolerance %.6g)"
                  % ("PASS" if ok else "FAIL", res.name, name, residual,
                     tolerance))
    total = sum(len(r.assertions) for r in results)
    failed = sum(1 for r in results for a in r.assertions if not a[1])
    print("%d assertions, %d failed; artifacts in %s" % (total, failed, out))
    if not report["passed"]:
        print("mms: assertion failures in %s" % ", ".join(
            r.name for r in results if not r.passed), file=sys.stderr)
        return 1
    return 0


def _cmd_list(args):
    for name in list_experiments():
        print(name)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mms",
        description="Finite metric measure space calculus: builders, "
                    "metric validation, and verification suites.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_space = sub.add_parser("space", help="space construction")
    space_sub = p_space.add_subparsers(dest="space_verb", required=True)
    p_build = space_sub.add_parser("build", help="build and save a grid space")
    p_build.add_argument("--grid", required=True,
                         help="point counts per axis, e.g. 64x64")
    p_build.add_argument("--spacing", type=float, default=0.05,
                         help="grid spacing (default 0.05)")
    p_build.add_argument("--norm", default=None,
                         help="norm spec such as p:2, p:inf, or "
                              "poly:(1,0);(0,1);(-1,0);(0,-1)")
    p_build.add_argument("--out", required=True, help="output .mms path")
    p_build.set_defaults(func=_cmd_space_build)

    p_check = sub.add_parser("check", help="validation passes")
    check_sub = p_check.add_subparsers(dest="check_verb", required=True)
    p_metric = check_sub.add_parser("metric",
                                    help="verify metric axioms of a saved space")
    p_metric.add_argument("path", help="saved .mms space file")
    p_metric.add_argument("--tol", type=float, default=1e-12)
    p_metric.add_argument("--sample", type=int, default=2_000_000,
                          help="triple sample size for large spaces")
    p_metric.add_argument("--seed", type=int, default=0)
    p_metric.set_defaults(func=_cmd_check_metric)

    p_run = sub.add_parser("run", help="run verification suites")
    p_run.add_argument("experiments", nargs="+",
                       help="suite names (see 'mms list'), or 'all'")
    p_run.add_argument("--config", default=None, help="INI config file")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one suite parameter (repeatable)")
    p_run.add_argument("--seed", type=int, default=None,
                       help="seed (default: config file, then MMS_SEED, then 0)")
    p_run.add_argument("--jobs", type=int, default=None,
                       help="max suites running in parallel (default 1)")
    p_run.add_argument("--out", default=None,
                       help="artifact directory (default mms-report)")
    for flag in _PARAM_FLAGS:
        p_run.add_argument("--%s" % flag, default=None,
                           help="suite parameter %r" % flag)
    p_run.set_defaults(func=_cmd_run)

    p_list = sub.add_parser("list", help="list experiment suites")
    p_list.set_defaults(func=_cmd_list)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
