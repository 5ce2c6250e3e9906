"""Command line interface.

Subcommands:

    profile build-mixture   stack class variance vectors into a profile CSV
    profile from-idx        per-class pixel variances from IDX image/label files
    profile normalize       rescale rows of a profile CSV to a common mean
    mc-risk                 empirical + trace-form Monte Carlo risk estimates
    lozenge-risk            surrogate Monte Carlo risk estimates
    det-risk                deterministic risk values (fixed point / closed form)
    sweep                   all requested estimators over the full grid
"""

from __future__ import annotations

import argparse
import sys
from contextlib import nullcontext
from dataclasses import replace

import numpy as np

from .config import ConfigError, load_config
from .profiles import (
    VarianceProfile,
    build_mixture_profile,
    class_variance_vectors,
    load_idx_pair,
    normalize_row_stochastic,
    read_profile_csv,
    write_profile_csv,
)
from .svgplot import AxesSpec, emit_svg
from .sweep import emit_csv, run_sweep

MC_CSV_FIELDS = (
    "estimator", "n", "m", "p", "lambda", "activation",
    "e_train", "e_test", "std_err_train", "std_err_test",
)


def _add_common(sub):
    sub.add_argument("--config", required=True, help="experiment config file")
    sub.add_argument("--out", default="-", help="output CSV path (default stdout)")
    sub.add_argument("--seed", type=int, default=None, help="override config seed")
    sub.add_argument("--threads", type=int, default=None, help="override config threads")
    sub.add_argument("--svg", default=None, help="also render curves to this SVG file")


def _open_out(path):
    if path == "-":
        return nullcontext(sys.stdout)
    return open(path, "w")


def _write_mc_csv(rows, cfg, out):
    out.write(",".join(MC_CSV_FIELDS) + "\n")
    for r in rows:
        m = max(1, round(r.ratio * cfg.n))
        out.write(
            ",".join(
                (
                    r.estimator, str(cfg.n), str(m), str(cfg.p), f"{r.lam:.10g}",
                    r.activation, f"{r.e_train:.10g}", f"{r.e_test:.10g}",
                    f"{r.std_err_train:.10g}", f"{r.std_err_test:.10g}",
                )
            )
            + "\n"
        )


def _restricted_sweep(args, allowed):
    overrides = {"seed": args.seed, "threads": args.threads}
    cfg = load_config(args.config, overrides)
    keep = tuple(e for e in cfg.estimators if e in allowed) or allowed
    cfg = replace(cfg, estimators=keep)
    if getattr(args, "trials", None):
        cfg = replace(cfg, trials=args.trials)
    rows = run_sweep(cfg)
    return cfg, rows


def _maybe_svg(args, rows):
    if args.svg:
        emit_svg(rows, args.svg, AxesSpec())


def cmd_mc_risk(args):
    cfg, rows = _restricted_sweep(args, ("empirical", "trace_form"))
    with _open_out(args.out) as out:
        _write_mc_csv(rows, cfg, out)
    _maybe_svg(args, rows)
    return 0


def cmd_lozenge_risk(args):
    cfg, rows = _restricted_sweep(args, ("lozenge",))
    with _open_out(args.out) as out:
        _write_mc_csv(rows, cfg, out)
    _maybe_svg(args, rows)
    return 0


def cmd_det_risk(args):
    cfg, rows = _restricted_sweep(args, ("square",))
    with _open_out(args.out) as out:
        _write_mc_csv(rows, cfg, out)
    _maybe_svg(args, rows)
    if args.diagnostics is not None:
        stream = sys.stderr if args.diagnostics == "-" else open(args.diagnostics, "w")
        try:
            for r in rows:
                stream.write(
                    f"activation={r.activation} ratio={r.ratio:.10g} lambda={r.lam:.10g} "
                    f"iterations={r.iterations} imag_residue={r.imag_residue:.3e} "
                    f"status={r.status}\n"
                )
        finally:
            if stream is not sys.stderr:
                stream.close()
    return 0


def cmd_sweep(args):
    overrides = {"seed": args.seed, "threads": args.threads}
    cfg = load_config(args.config, overrides)
    rows = run_sweep(cfg)
    if args.out == "-":
        emit_csv_stdout(rows)
    else:
        emit_csv(rows, args.out)
    if args.svg:
        emit_svg(rows, args.svg, AxesSpec(title=args.svg_title or ""))
    return 0


def emit_csv_stdout(rows):
    from .sweep import CSV_FIELDS

    sys.stdout.write(",".join(CSV_FIELDS) + "\n")
    for row in rows:
        sys.stdout.write(",".join(row.as_csv_values()) + "\n")


def cmd_profile_build_mixture(args):
    vectors_profile = read_profile_csv(args.class_vectors)
    vectors = [row for row in vectors_profile.entries]
    counts = [int(tok) for tok in args.counts.split(",")]
    if len(counts) == 1:
        counts = counts * len(vectors)
    profile = build_mixture_profile(vectors, counts)
    if args.target_s2 is not None:
        profile = normalize_row_stochastic(profile, args.target_s2)
    write_profile_csv(profile, args.out)
    return 0


def cmd_profile_from_idx(args):
    with open(args.images, "rb") as fi, open(args.labels, "rb") as fl:
        images, labels = load_idx_pair(fi.read(), fl.read())
    vectors = class_variance_vectors(
        images, labels, rescale=args.rescale, num_classes=args.num_classes
    )
    write_profile_csv(VarianceProfile(np.stack(vectors)), args.out)
    return 0


def cmd_profile_normalize(args):
    profile = read_profile_csv(args.infile)
    write_profile_csv(normalize_row_stochastic(profile, args.target), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfvp",
        description="Risk estimates for random-features ridge regression on variance-profiled data",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    prof = subs.add_parser("profile", help="variance profile construction and ingestion")
    prof_subs = prof.add_subparsers(dest="profile_command", required=True)

    pm = prof_subs.add_parser("build-mixture", help="stack class variance vectors")
    pm.add_argument("--class-vectors", required=True, help="CSV of K class vectors (K x p)")
    pm.add_argument("--counts", required=True, help="per-class row counts, e.g. 30 or 30,40,...")
    pm.add_argument("--target-s2", type=float, default=None, help="normalize rows to this mean")
    pm.add_argument("--out", required=True)
    pm.set_defaults(func=cmd_profile_build_mixture)

    pi = prof_subs.add_parser("from-idx", help="per-class pixel variances from IDX files")
    pi.add_argument("--images", required=True)
    pi.add_argument("--labels", required=True)
    pi.add_argument("--rescale", type=float, default=1.0)
    pi.add_argument("--num-classes", type=int, default=None)
    pi.add_argument("--out", required=True)
    pi.set_defaults(func=cmd_profile_from_idx)

    pn = prof_subs.add_parser("normalize", help="rescale profile rows to a common mean")
    pn.add_argument("--in", dest="infile", required=True)
    pn.add_argument("--target", type=float, default=1.0)
    pn.add_argument("--out", required=True)
    pn.set_defaults(func=cmd_profile_normalize)

    mc = subs.add_parser("mc-risk", help="Monte Carlo risk estimates")
    _add_common(mc)
    mc.add_argument("--trials", type=int, default=None, help="override config trials")
    mc.set_defaults(func=cmd_mc_risk)

    lz = subs.add_parser("lozenge-risk", help="surrogate Monte Carlo risk estimates")
    _add_common(lz)
    lz.add_argument("--trials", type=int, default=None)
    lz.set_defaults(func=cmd_lozenge_risk)

    dr = subs.add_parser("det-risk", help="deterministic risk values")
    _add_common(dr)
    dr.add_argument(
        "--diagnostics", nargs="?", const="-", default=None,
        help="emit solver diagnostics as key=value lines (default stderr)",
    )
    dr.set_defaults(func=cmd_det_risk)

    sw = subs.add_parser("sweep", help="full estimator sweep over the grid")
    _add_common(sw)
    sw.add_argument("--svg-title", default=None)
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
