"""Run configuration, convergence studies, splitting comparisons and tables."""
from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .catalog import PROBLEM_IDS, make_problem
from .core_model import FracOrder, sample_field
from .diagnostics import max_error, observed_rate
from .errors import FracAdiError
from .splitting import BOOTSTRAPS, SchemeKind, run

_PROBLEM_DIMS = {"p1d": 1, "p2d": 2, "p3d": 3, "riesz2d": 2}
_RIESZ_PROBLEMS = {"riesz2d"}
EQUIVALENCE_TOL = 1e-13


def parse_number(text) -> float:
    """Float from ``"2.5"`` or a ratio such as ``"5/2"``."""
    if isinstance(text, (int, float)):
        return float(text)
    return float(Fraction(str(text).strip()))


def _parse_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(parse_number(v) for v in text)
    return tuple(parse_number(v) for v in str(text).replace(";", ",").split(",") if v.strip())


@dataclass
class RunConfig:
    """One run: problem, orders, scheme and discretisation.

    ``n`` is the number of intervals per axis on the coarsest level and the
    time step is ``nt_ratio * h``.  ``bootstrap`` picks how the two-step
    schemes obtain ``u^1``; when unset, solves and convergence studies use
    D-ADI and splitting comparisons use the exact solution.
    """

    problem: str = "p1d"
    alpha: float = 1.5
    beta: Optional[float] = None
    gamma: Optional[float] = None
    scheme: str = "cn"
    n: int = 10
    nt_ratio: float = 1.0
    t_end: Optional[float] = None
    output: Optional[str] = None
    format: str = "csv"
    levels: int = 5
    ratios: tuple = (10.0, 5.0, 2.5, 1.0)
    bootstrap: Optional[str] = None
    forcing: str = "closed"
    name: str = "run"

    def __post_init__(self):
        self.problem = str(self.problem).strip().lower()
        if self.problem not in PROBLEM_IDS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {PROBLEM_IDS}")
        self.alpha = float(FracOrder(parse_number(self.alpha)).value)
        for name in ("beta", "gamma"):
            v = getattr(self, name)
            setattr(self, name, None if v in (None, "") else float(FracOrder(parse_number(v)).value))
        kind = SchemeKind.parse(self.scheme)
        self.scheme = kind.value
        self.n = int(self.n)
        if self.n < 2:
            raise ValueError("n must be at least 2")
        self.nt_ratio = parse_number(self.nt_ratio)
        if not self.nt_ratio > 0:
            raise ValueError("nt_ratio must be positive")
        if self.t_end not in (None, ""):
            self.t_end = parse_number(self.t_end)
        else:
            self.t_end = None
        self.format = str(self.format).strip().lower()
        if self.format not in ("csv", "markdown"):
            raise ValueError("format must be csv or markdown")
        self.levels = int(self.levels)
        if self.levels < 1:
            raise ValueError("levels must be positive")
        self.ratios = _parse_list(self.ratios)
        if self.bootstrap not in (None, ""):
            if self.bootstrap not in BOOTSTRAPS:
                raise ValueError(f"bootstrap must be one of {BOOTSTRAPS}")
        else:
            self.bootstrap = None
        self.check_admissible()

    def check_admissible(self):
        kind = SchemeKind.parse(self.scheme)
        dims = _PROBLEM_DIMS[self.problem]
        allowed = {SchemeKind.CN_FULL: (1, 2, 3), SchemeKind.D_ADI: (2, 3)}.get(kind, (2,))
        if dims not in allowed:
            raise ValueError(f"scheme {kind.label} cannot solve the {dims}D problem {self.problem}")
        if kind.two_step and self.problem not in _RIESZ_PROBLEMS:
            raise ValueError(f"scheme {kind.label} needs a Riesz-form problem")

    @property
    def kind(self) -> SchemeKind:
        return SchemeKind.parse(self.scheme)

    @property
    def orders(self) -> tuple:
        beta = self.alpha if self.beta is None else self.beta
        gamma = self.alpha if self.gamma is None else self.gamma
        return (self.alpha, beta, gamma)[:_PROBLEM_DIMS[self.problem]]

    def build(self, n: Optional[int] = None, nt_ratio: Optional[float] = None):
        return make_problem(self.problem, self.alpha, self.beta, self.gamma,
                            n=self.n if n is None else n,
                            nt_ratio=self.nt_ratio if nt_ratio is None else nt_ratio,
                            t_end=self.t_end, forcing=self.forcing)


_KEYS = {f.name for f in fields(RunConfig)} - {"name"}


def parse_config(text: str, overrides: Optional[dict] = None) -> list:
    """Parse ``key = value`` text into RunConfigs, one per ``[section]``.

    Text without a section header forms a single ``[run]`` section.  Keys in
    ``overrides`` (e.g. from command-line flags) replace file values.
    """
    content = [ln.strip() for ln in text.splitlines() if ln.strip() and ln.strip()[0] not in "#;"]
    if not content:
        raise ValueError("configuration is empty")
    if not any(line.startswith("[") for line in content):
        text = "[run]\n" + text
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.read_string(text)
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    configs = []
    for section in parser.sections():
        raw = dict(parser.items(section))
        unknown = sorted(set(raw) - _KEYS)
        if unknown:
            raise ValueError(f"unknown config keys in [{section}]: {', '.join(unknown)}")
        raw.update(overrides)
        configs.append(RunConfig(name=section, **raw))
    if not configs:
        raise ValueError("configuration has no runs")
    return configs


def load_config(path: str, overrides: Optional[dict] = None) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)


@dataclass
class ConvergenceRecord:
    problem: str
    scheme: str
    orders: tuple
    level: int
    n: int
    h: float
    tau: float
    error: Optional[float] = None
    rate: Optional[float] = None
    steps: int = 0
    failure: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.failure is None


def solve(cfg: RunConfig, n: Optional[int] = None, nt_ratio: Optional[float] = None):
    """Run ``cfg`` once; returns ``(final field, max error, problem, steps)``."""
    problem = cfg.build(n, nt_ratio)
    u, steps = run(problem, cfg.kind, cfg.bootstrap or "d_adi")
    err = max_error(u, sample_field(problem, "exact", problem.time.t_end))
    return u, err, problem, steps


def run_convergence_study(cfg: RunConfig, ns: Optional[Sequence[int]] = None) -> list:
    """Errors and observed rates over mesh-halving levels.

    Level ``k`` uses ``n * 2**k`` intervals with ``tau = nt_ratio * h``.  A
    failing level is recorded with its message and the study continues.
    """
    ns = [cfg.n * 2 ** k for k in range(cfg.levels)] if ns is None else [int(v) for v in ns]
    if len(set(ns)) != len(ns):
        raise ValueError("refinement levels must differ; got duplicate mesh sizes")
    if len(ns) < 1:
        raise ValueError("need at least one level")
    records = []
    prev = None
    for level, n in enumerate(ns, start=1):
        problem_h = None
        try:
            u, err, problem, steps = solve(cfg, n)
            problem_h = problem.axes[0].h
            rec = ConvergenceRecord(cfg.problem, cfg.kind.label, cfg.orders, level, n, problem_h,
                                    problem.time.tau, err, None, steps)
            if prev is not None and prev.ok and err > 0 and prev.error > 0:
                rec.rate = observed_rate(prev.error, err) / math.log2(prev.h / rec.h)
        except (FracAdiError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            h = problem_h if problem_h is not None else float("nan")
            rec = ConvergenceRecord(cfg.problem, cfg.kind.label, cfg.orders, level, n, h,
                                    float("nan"), failure=f"{type(exc).__name__}: {exc}")
        records.append(rec)
        prev = rec
    return records


@dataclass
class SplittingRow:
    scheme: str
    ratio: float
    error: float


@dataclass
class SplittingComparison:
    rows: list = field(default_factory=list)
    equivalence_gap: dict = field(default_factory=dict)

    def error(self, scheme: str, ratio: float) -> float:
        for r in self.rows:
            if r.scheme == scheme and r.ratio == ratio:
                return r.error
        raise KeyError((scheme, ratio))


def run_splitting_comparison(cfg: RunConfig, tol: float = EQUIVALENCE_TOL) -> SplittingComparison:
    """D-ADI, D-ADI-II and FS-II at each ``tau/h`` ratio of ``cfg.ratios``.

    Raises FracAdiError if D-ADI-II and FS-II differ by more than ``tol``.
    """
    if cfg.problem not in _RIESZ_PROBLEMS:
        raise ValueError("splitting comparisons need the riesz2d problem")
    bootstrap = cfg.bootstrap or "exact"
    out = SplittingComparison()
    for ratio in cfg.ratios:
        problem = cfg.build(nt_ratio=ratio)
        exact = sample_field(problem, "exact", problem.time.t_end)
        u_d, _ = run(problem, SchemeKind.D_ADI)
        u_d2, _ = run(problem, SchemeKind.D_ADI_II, bootstrap)
        u_fs2, _ = run(problem, SchemeKind.FS_II, bootstrap)
        gap = float(np.max(np.abs(u_d2.values - u_fs2.values)))
        out.equivalence_gap[ratio] = gap
        if gap > tol:
            raise FracAdiError(f"D-ADI-II and FS-II differ by {gap:.3e} at tau/h={ratio:g}")
        for label, u in (("D-ADI", u_d), ("FS-II", u_fs2), ("D-ADI-II", u_d2)):
            out.rows.append(SplittingRow(label, ratio, max_error(u, exact)))
    return out


def _fmt_err(v) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.4e}"


def _fmt_rate(v) -> str:
    return "" if v is None else f"{v:.4f}"


def _orders_label(orders) -> str:
    names = ("alpha", "beta", "gamma")
    return " ".join(f"{names[i]}={o:g}" for i, o in enumerate(orders))


def _mesh_label(h: float) -> str:
    if not h > 0 or math.isnan(h):
        return "?"
    inv = 1.0 / h
    return f"1/{round(inv)}" if abs(inv - round(inv)) < 1e-9 else f"{h:.6g}"


def emit_table(records: Sequence[ConvergenceRecord], fmt: str = "csv") -> str:
    """Render convergence records.

    CSV is long format with columns ``level, h, tau, error, rate`` followed
    by identifying columns; markdown is wide, one error/rate column pair per
    order combination.
    """
    if not records:
        raise ValueError("no records to emit")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "h", "tau", "error", "rate", "problem", "scheme", "orders", "status"])
        for r in records:
            w.writerow([r.level, f"{r.h:.10g}", f"{r.tau:.10g}", _fmt_err(r.error), _fmt_rate(r.rate),
                        r.problem, r.scheme, _orders_label(r.orders), "ok" if r.ok else r.failure])
        return buf.getvalue()
    if fmt == "markdown":
        groups = {}
        for r in records:
            groups.setdefault((r.scheme, tuple(r.orders)), {})[r.level] = r
        levels = sorted({r.level for r in records})
        header = ["h, tau"]
        for scheme, orders in groups:
            header += [f"{scheme} {_orders_label(orders)}", "rate"]
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        for lv in levels:
            any_rec = next(g[lv] for g in groups.values() if lv in g)
            row = [_mesh_label(any_rec.h)]
            for g in groups.values():
                r = g.get(lv)
                if r is None:
                    row += ["", ""]
                elif not r.ok:
                    row += ["FAILED", ""]
                else:
                    row += [_fmt_err(r.error), _fmt_rate(r.rate)]
            lines.append("| " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit_splitting_table(result: SplittingComparison, fmt: str = "csv") -> str:
    """CSV ``scheme, ratio, error`` rows, or a markdown grid of schemes by ratio."""
    if not result.rows:
        raise ValueError("no rows to emit")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scheme", "tau_over_h", "error"])
        for r in result.rows:
            w.writerow([r.scheme, f"{r.ratio:g}", _fmt_err(r.error)])
        return buf.getvalue()
    if fmt == "markdown":
        ratios = list(dict.fromkeys(r.ratio for r in result.rows))
        schemes = list(dict.fromkeys(r.scheme for r in result.rows))
        lines = ["| scheme | " + " | ".join(f"tau={q:g}h" for q in ratios) + " |",
                 "|" + "---|" * (len(ratios) + 1)]
        for s in schemes:
            lines.append(f"| {s} | " + " | ".join(_fmt_err(result.error(s, q)) for q in ratios) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")
