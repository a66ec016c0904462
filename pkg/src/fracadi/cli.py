"""Command-line entry point: ``fracadi {solve,convergence,compare-splitting,stability-report}``."""
from __future__ import annotations

import argparse
import sys
from typing import Optional

from . import harness
from .diagnostics import stability_suite
from .errors import FracAdiError

_OVERRIDES = ("problem", "alpha", "beta", "gamma", "scheme", "n", "nt_ratio", "t_end",
              "output", "format", "bootstrap", "forcing")


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--problem", choices=["p1d", "p2d", "p3d", "riesz2d"])
    p.add_argument("--alpha")
    p.add_argument("--beta")
    p.add_argument("--gamma")
    p.add_argument("--scheme")
    p.add_argument("--n", type=int, help="intervals per axis (coarsest level)")
    p.add_argument("--nt-ratio", dest="nt_ratio", help="tau / h, e.g. 1 or 5/2")
    p.add_argument("--t-end", dest="t_end")
    p.add_argument("--output", help="write the table here instead of stdout")
    p.add_argument("--format", choices=["csv", "markdown"])
    p.add_argument("--bootstrap", choices=["d_adi", "exact"])
    p.add_argument("--forcing", choices=["closed", "power", "oracle"])


def _configs(args) -> list:
    overrides = {k: getattr(args, k, None) for k in _OVERRIDES}
    if getattr(args, "levels", None) is not None:
        overrides["levels"] = args.levels
    if getattr(args, "ratios", None) is not None:
        overrides["ratios"] = args.ratios
    if args.config:
        return harness.load_config(args.config, overrides)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return [harness.RunConfig(**overrides)]


def _write(text: str, path: Optional[str], append: bool = False):
    if path:
        with open(path, "a" if append else "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_runs(configs, make_text) -> int:
    ok = True
    written = set()
    for cfg in configs:
        text, good = make_text(cfg)
        ok &= good
        _write(text, cfg.output, append=cfg.output in written)
        if cfg.output:
            written.add(cfg.output)
    return 0 if ok else 1


def cmd_solve(args) -> int:
    def one(cfg):
        u, err, problem, steps = harness.solve(cfg)
        rec = harness.ConvergenceRecord(cfg.problem, cfg.kind.label, cfg.orders, 1, cfg.n,
                                        problem.axes[0].h, problem.time.tau, err, None, steps)
        return harness.emit_table([rec], cfg.format), True
    return _emit_runs(_configs(args), one)


def cmd_convergence(args) -> int:
    def one(cfg):
        recs = harness.run_convergence_study(cfg)
        good = all(r.ok for r in recs)
        for r in recs:
            if not r.ok:
                print(f"level {r.level} failed: {r.failure}", file=sys.stderr)
        return harness.emit_table(recs, cfg.format), good
    return _emit_runs(_configs(args), one)


def cmd_compare(args) -> int:
    def one(cfg):
        res = harness.run_splitting_comparison(cfg)
        return harness.emit_splitting_table(res, cfg.format), True
    return _emit_runs(_configs(args), one)


def _float_list(text: str) -> list:
    return [harness.parse_number(v) for v in text.split(",") if v.strip()]


def cmd_stability(args) -> int:
    mus = _float_list(args.mu)
    sizes = [int(v) for v in _float_list(args.sizes)]
    reports = stability_suite(mus, sizes)
    text = "\n\n".join(r.to_text() for r in reports) + "\n"
    _write(text, args.output)
    return 0 if all(r.passed for r in reports) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracadi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one configuration and report the final max error")
    _add_run_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("convergence", help="errors and rates over mesh-halving levels")
    _add_run_flags(p)
    p.add_argument("--levels", type=int, help="number of refinement levels")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("compare-splitting", help="D-ADI vs D-ADI-II vs FS-II at several tau/h")
    _add_run_flags(p)
    p.add_argument("--ratios", help="comma-separated tau/h ratios, e.g. 10,5,5/2,1")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stability-report", help="numerical checks of the stability theory")
    p.add_argument("--mu", default="1.1,1.5,1.9", help="comma-separated orders")
    p.add_argument("--sizes", default="4,8,16,32", help="comma-separated matrix sizes q")
    p.add_argument("--output")
    p.set_defaults(func=cmd_stability)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FracAdiError, ValueError, OSError) as exc:
        print(f"fracadi: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
