"""Batch driver: ``zetamellin {sample,moments,mellin,spectral,report}``.

Each stage reads a flat ``key=value`` config (flags override it), writes its
CSV tables into the output directory together with a stage report
``<stage>_report.csv``, and exits 0 only when none of its checks failed.
``report`` merges the stage reports into ``report.csv`` and ``report.txt``.

All CSV output is byte-stable: floats are written with ``repr`` and nothing
time- or host-dependent goes into a CSV. Wall-clock times, the config echo
and artifact checksums appear only in the text reports.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import checks as ck
from . import mellin as ml
from . import spectral as sp
from .errors import CoverageError, DataError, DomainError, ZetaMellinError
from .moments import (MomentEngine, MomentTable, fit_p4, install_engine, load_coefficients,
                      write_coefficients)
from .zeta import SampleCache, sample_line

logger = logging.getLogger(__name__)

STAGES = ("sample", "moments", "mellin", "spectral")


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def _floats(text) -> tuple[float, ...]:
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).replace(" ", "").split(",") if v)


@dataclass
class ExperimentConfig:
    """Everything one CLI run depends on; echoed into every text report."""

    out: Path = Path("zetamellin_out")
    cache: Path | None = None
    engine: Path | None = None
    spectral_data: Path | None = None
    t0: float = 10.0
    t1: float = 100.0
    step: float = 0.01
    moments_t0: float = 100.0
    moments_t1: float = 5000.0
    moments_step: float = 1.0
    fit_t0: float = 500.0
    fit_t1: float = 5000.0
    sigma: tuple = (0.6, 0.75, 0.9)
    X: float = ml.DEFAULT_X
    tmax: float = 1000.0
    line_tmax: float = 100.0
    i_sigma_T: tuple = ck.I_SIGMA_T
    workers: int = 1
    tolerances: dict = field(default_factory=dict)

    _PATHS = ("out", "cache", "engine", "spectral_data")
    _TUPLES = ("sigma", "i_sigma_T")

    @property
    def cache_path(self) -> Path:
        return Path(self.cache) if self.cache else self.out / "zcache.bin"

    @property
    def engine_path(self) -> Path:
        return Path(self.engine) if self.engine else self.out / "moment_engine.npz"

    @property
    def engine_t_max(self) -> float:
        return max(self.moments_t1, self.fit_t1, self.X)

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        """Build from string values (config file or flags); unknown keys are errors."""
        kwargs, tol = {}, {}
        names = {f.name: f for f in dataclasses.fields(cls)}
        for key, raw in values.items():
            if raw is None:
                continue
            if key.startswith("tol."):
                tol[key[4:]] = float(raw)
                continue
            if key not in names or key == "tolerances":
                raise DomainError(f"config: unknown key '{key}'")
            try:
                if key in cls._PATHS:
                    kwargs[key] = Path(raw) if raw != "" else None
                elif key in cls._TUPLES:
                    kwargs[key] = _floats(raw)
                elif key == "workers":
                    kwargs[key] = int(raw)
                else:
                    kwargs[key] = float(raw)
            except ValueError as exc:
                raise DomainError(f"config: bad value for '{key}': {raw!r}") from exc
        cfg = cls(**kwargs)
        cfg.tolerances = tol
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Ranges nonempty, steps positive, input paths present; raises naming the offending key."""
        for lo, hi in (("t0", "t1"), ("moments_t0", "moments_t1"), ("fit_t0", "fit_t1")):
            if not getattr(self, lo) < getattr(self, hi):
                raise DomainError(f"config: empty range {lo}={getattr(self, lo)} .. {hi}={getattr(self, hi)}")
        for key in ("step", "moments_step", "X", "tmax", "line_tmax"):
            if not getattr(self, key) > 0:
                raise DomainError(f"config: {key} must be positive, got {getattr(self, key)}")
        if self.t0 < 0:
            raise DomainError(f"config: t0 must be >= 0, got {self.t0}")
        if self.workers < 1:
            raise DomainError(f"config: workers must be >= 1, got {self.workers}")
        if not self.sigma:
            raise DomainError("config: sigma list is empty")
        if any(not 0.5 < s < 1 for s in self.sigma):
            raise DomainError(f"config: every sigma must lie in (1/2, 1), got {self.sigma}")
        if len(self.i_sigma_T) < 2 or min(self.i_sigma_T) <= 1:
            raise DomainError(f"config: i_sigma_T needs at least two heights above 1, got {self.i_sigma_T}")
        if self.spectral_data is not None and not Path(self.spectral_data).is_file():
            raise DataError(f"config: spectral_data file not found: {self.spectral_data}")

    def echo(self) -> list[str]:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "tolerances":
                lines += [f"tol.{k}={v[k]!r}" for k in sorted(v)]
            elif isinstance(v, tuple):
                lines.append(f"{f.name}={','.join(repr(float(x)) for x in v)}")
            else:
                lines.append(f"{f.name}={'' if v is None else v}")
        return lines


def read_config_file(path: str | Path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{line_no}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        values[k.strip()] = v.strip()
    return values


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

REPORT_HEADER = ["stage", "name", "status", "lhs", "rhs", "diff", "budget", "detail"]


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunReport:
    """Checks of one or more stages, with timings, config echo and output checksums."""

    stage: str
    checks: list = field(default_factory=list)   # (stage, CheckRecord)
    timings: dict = field(default_factory=dict)
    config: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def add(self, records, stage: str | None = None, overrides: dict | None = None) -> None:
        for r in ([records] if isinstance(records, ck.CheckRecord) else records):
            if overrides and r.name in overrides and r.status != ck.SKIPPED:
                r = dataclasses.replace(r, budget=overrides[r.name],
                                        status=ck.PASS if r.diff <= overrides[r.name] else ck.FAIL)
            if any(existing.name == r.name for _, existing in self.checks):
                raise DataError(f"check '{r.name}' recorded twice")
            self.checks.append((stage or self.stage, r))

    def record_artifact(self, path: Path) -> None:
        self.artifacts[path.name] = sha256_file(path)

    @property
    def failed(self) -> list[str]:
        return [r.name for _, r in self.checks if r.status == ck.FAIL]

    @property
    def passed(self) -> bool:
        return not self.failed

    def counts(self) -> dict:
        out = {ck.PASS: 0, ck.FAIL: 0, ck.SKIPPED: 0}
        for _, r in self.checks:
            out[r.status] += 1
        return out

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_HEADER)
            for stage, r in self.checks:
                w.writerow([stage, r.name, r.status, repr(r.lhs), repr(r.rhs), repr(r.diff), repr(r.budget),
                            r.detail])

    def text(self) -> str:
        c = self.counts()
        lines = [f"{self.stage}: {'PASS' if self.passed else 'FAIL'} "
                 f"({c[ck.PASS]} passed, {c[ck.FAIL]} failed, {c[ck.SKIPPED]} skipped)", ""]
        for stage, r in self.checks:
            if r.status == ck.SKIPPED:
                lines.append(f"  [skipped] {stage}/{r.name}: {r.detail}")
            else:
                lines.append(f"  [{r.status}] {stage}/{r.name}: lhs={r.lhs:.10g} rhs={r.rhs:.10g} "
                             f"diff={r.diff:.3g} budget={r.budget:.3g}  {r.detail}")
        if self.failed:
            lines += ["", "failed checks: " + ", ".join(self.failed)]
        if self.notes:
            lines += [""] + self.notes
        if self.timings:
            lines += ["", "wall clock:"] + [f"  {k}: {v:.2f} s" for k, v in self.timings.items()]
        if self.artifacts:
            lines += ["", "artifacts (sha256):"] + [f"  {k}: {v}" for k, v in sorted(self.artifacts.items())]
        if self.config:
            lines += ["", "config:"] + [f"  {line}" for line in self.config]
        return "\n".join(lines) + "\n"

    def write(self, out: Path, name: str | None = None) -> Path:
        name = name or f"{self.stage}_report"
        csv_path = out / f"{name}.csv"
        self.write_csv(csv_path)
        (out / f"{name}.txt").write_text(self.text())
        return csv_path


def read_report_csv(path: str | Path) -> list[tuple[str, ck.CheckRecord]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != REPORT_HEADER:
            raise DataError(f"{path}: not a stage report (header {header})")
        for row_no, row in enumerate(reader, start=2):
            try:
                stage, name, status = row[:3]
                lhs, rhs, diff, budget = (float(v) for v in row[3:7])
            except ValueError as exc:
                raise DataError(f"{path}:{row_no}: malformed report row") from exc
            if status not in (ck.PASS, ck.FAIL, ck.SKIPPED):
                raise DataError(f"{path}:{row_no}: unknown status {status!r}")
            rows.append((stage, ck.CheckRecord(name, lhs, rhs, diff, budget, status, row[7])))
    return rows


# --------------------------------------------------------------------------
# SVG
# --------------------------------------------------------------------------

def _path(xs, ys, sx, sy) -> str:
    pts = " L".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
    return f"M{pts}"


def e2_svg(T: np.ndarray, E: np.ndarray, guide: float, width: int = 800, height: int = 500,
           max_points: int = 2000) -> str:
    """E2(T) as a polyline with the guide curves +/- guide * T^(2/3); self-contained SVG text."""
    stride = max(1, int(math.ceil(len(T) / max_points)))
    t, e = T[::stride], E[::stride]
    g = guide * t ** (2.0 / 3.0)
    ymax = float(max(np.max(np.abs(e)), np.max(g))) * 1.05 or 1.0
    m = 50
    sx = lambda x: m + (x - t[0]) / (t[-1] - t[0]) * (width - 2 * m)  # noqa: E731
    sy = lambda y: height / 2 - y / ymax * (height / 2 - m)  # noqa: E731
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{m}" y1="{height / 2:.2f}" x2="{width - m}" y2="{height / 2:.2f}" stroke="black"/>',
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{height - m}" stroke="black"/>',
        f'<text x="{m}" y="{height - 15}" font-size="12">T = {t[0]:g}</text>',
        f'<text x="{width - m}" y="{height - 15}" font-size="12" text-anchor="end">T = {t[-1]:g}</text>',
        f'<text x="{m + 5}" y="{m - 10}" font-size="12">E2(T); guides +/-{guide:.4g} T^(2/3)</text>',
        f'<path id="e2" d="{_path(t, e, sx, sy)}" fill="none" stroke="steelblue" stroke-width="1"/>',
        f'<path id="guide-upper" d="{_path(t, g, sx, sy)}" fill="none" stroke="firebrick" stroke-dasharray="4 3"/>',
        f'<path id="guide-lower" d="{_path(t, -g, sx, sy)}" fill="none" stroke="firebrick" stroke-dasharray="4 3"/>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------

def _start(cfg: ExperimentConfig, stage: str) -> RunReport:
    cfg.out.mkdir(parents=True, exist_ok=True)
    return RunReport(stage, config=cfg.echo())


def _finish(cfg: ExperimentConfig, report: RunReport, t_start: float) -> RunReport:
    report.timings[report.stage] = time.perf_counter() - t_start
    report.write(cfg.out)
    return report


def _write_rows(path: Path, header: Sequence[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])
    return path


def load_engine(cfg: ExperimentConfig, need: float) -> MomentEngine:
    """The stored moment engine, required to cover [0, need]."""
    path = cfg.engine_path
    if not path.exists():
        raise CoverageError(f"moment engine {path} missing; run 'sample' first (needs [0, {need}])")
    eng = MomentEngine.load(path)
    if eng.edges[-1] < need:
        raise CoverageError(f"moment engine {path} covers [0, {eng.edges[-1]}]; "
                            f"missing interval ({eng.edges[-1]}, {need}]")
    install_engine(eng)
    return eng


def cmd_sample(cfg: ExperimentConfig) -> RunReport:
    """Fill the sample cache on [t0, t1], build the moment engine, run the Z oracle checks."""
    t_start = time.perf_counter()
    report = _start(cfg, "sample")
    cache = SampleCache(cfg.cache_path)
    line = sample_line(cfg.t0, cfg.t1, cfg.step, cache, workers=cfg.workers)
    az = np.abs(line.z)
    summary = _write_rows(cfg.out / "sample_summary.csv", ["t0", "t1", "step", "count", "min_abs_z", "max_abs_z"],
                          [(cfg.t0, cfg.t1, cfg.step, len(line), float(az.min()), float(az.max()))])
    report.record_artifact(summary)
    report.notes.append(f"sample cache {cfg.cache_path}: {len(line)} samples, "
                        f"{cache.hits} hits, {cache.misses} computed")
    logger.info("sample: %d samples, %d hits, %d misses", len(line), cache.hits, cache.misses)

    need = cfg.engine_t_max
    path = cfg.engine_path
    eng = None
    if path.exists():
        try:
            eng = MomentEngine.load(path)
        except (DataError, OSError, KeyError, ValueError):
            eng = None
    if eng is None or eng.edges[-1] < need:
        t = time.perf_counter()
        eng = MomentEngine(need, workers=cfg.workers)
        eng.save(path)
        report.timings["engine_build"] = time.perf_counter() - t
    report.add(ck.oracle_check(), overrides=cfg.tolerances)
    report.add(ck.derivative_checks(), overrides=cfg.tolerances)
    return _finish(cfg, report, t_start)


def cmd_moments(cfg: ExperimentConfig) -> RunReport:
    """Pinned P4 fit, the moment table, the E2 plot and the E2 trend checks."""
    t_start = time.perf_counter()
    report = _start(cfg, "moments")
    eng = load_engine(cfg, max(cfg.moments_t1, cfg.fit_t1))
    span = (cfg.fit_t0, cfg.fit_t1)
    coeffs = fit_p4(ck.fit_grid(span), engine=eng)
    write_coefficients(coeffs, cfg.out / "coefficients.csv")
    T = np.arange(cfg.moments_t0, cfg.moments_t1 + cfg.moments_step / 2, cfg.moments_step)
    table = MomentTable.build(T, coeffs, eng)
    table.write_csv(cfg.out / "moments.csv")
    trend = ck.e2_trend(coeffs, eng, cfg.moments_t0, cfg.moments_t1, cfg.moments_step)
    _write_rows(cfg.out / "e2_blocks.csv", ["T_end", "sup_abs_e2_over_T23"],
                zip(trend.block_ends, trend.block_sup_ratio))
    guide = float(np.max(np.abs(table.E2) / table.T ** (2.0 / 3.0)))
    (cfg.out / "e2_plot.svg").write_text(e2_svg(table.T, table.E2, guide))
    for name in ("coefficients.csv", "moments.csv", "e2_blocks.csv", "e2_plot.svg"):
        report.record_artifact(cfg.out / name)
    report.add(ck.a4_recovery_check(eng, span), overrides=cfg.tolerances)
    report.add(ck.e2_checks(trend), overrides=cfg.tolerances)
    return _finish(cfg, report, t_start)


def _load_cj(cfg: ExperimentConfig, eng: MomentEngine) -> ml.CjCoefficients:
    path = cfg.out / "coefficients.csv"
    if not path.exists():
        raise DataError(f"{path} missing; run 'moments' first")
    return ml.c_from_a(load_coefficients(path), engine=eng)


def cmd_mellin(cfg: ExperimentConfig) -> RunReport:
    """Continued Z_2 lines per sigma, the identity suite and the I_sigma slope table."""
    t_start = time.perf_counter()
    report = _start(cfg, "mellin")
    eng = load_engine(cfg, cfg.engine_t_max)
    cj = _load_cj(cfg, eng)
    t = np.arange(0.0, cfg.line_tmax + 1e-9, 0.05)
    for sigma in cfg.sigma:
        line = ml.z2_continued(sigma + 1j * t, cj, cfg.X, engine=eng)
        path = cfg.out / f"z2_line_sigma{sigma!r}.csv"
        line.write_csv(path)
        report.record_artifact(path)
    suite = []
    suite += ck.inversion_checks(cfg.tmax)
    suite += ck.convolution_checks(cfg.tmax)
    suite += ck.parseval_checks(cfg.tmax)
    suite.append(ck.parseval_e2_check(cj.source, eng))
    suite.append(ck.mean_value_check())
    suite += ck.continuation_checks(cj, eng, cfg.X)
    suite.append(ck.pole_check(cj, eng, X=cfg.X))
    suite.append(ck.recurrence_check())
    suite.append(ck.contour_check(cj, eng, X=cfg.X))
    rows = ck.i_sigma_table(cj, eng, cfg.sigma, cfg.i_sigma_T, cfg.X)
    _write_rows(cfg.out / "i_sigma.csv", ["sigma", "T", "I_sigma"],
                [(r.sigma, T, v) for r in rows for T, v in zip(r.T, r.values)])
    _write_rows(cfg.out / "i_sigma_slopes.csv", ["sigma", "slope"], [(r.sigma, r.slope) for r in rows])
    for r in rows:
        if r.sigma == 0.75:
            suite.append(ck.i_sigma_check(r))
    _write_rows(cfg.out / "identities.csv", ["check", "lhs", "rhs", "abs_diff", "budget"],
                [(c.name, c.lhs, c.rhs, c.diff, c.budget) for c in suite])
    for name in ("i_sigma.csv", "i_sigma_slopes.csv", "identities.csv"):
        report.record_artifact(cfg.out / name)
    report.add(suite, overrides=cfg.tolerances)
    return _finish(cfg, report, t_start)


def cmd_spectral(cfg: ExperimentConfig) -> RunReport:
    """Saddle diagnostics always; fixture identities always; data scans when data are supplied."""
    t_start = time.perf_counter()
    report = _start(cfg, "spectral")
    report.add(ck.saddle_checks(), overrides=cfg.tolerances)
    report.add(ck.fixture_checks(), overrides=cfg.tolerances)
    ds = sp.load_spectral(cfg.spectral_data) if cfg.spectral_data is not None else None
    if ds is not None:
        report.config.append(f"spectral_data_sha256={ds.checksum}")
    scans = ck.data_scans(ds)
    if scans.unit is not None:
        u = scans.unit
        path = _write_rows(cfg.out / "unit_window_scan.csv", ["K", "sum", "ratio"], zip(u.K, u.sums, u.ratios))
        report.record_artifact(path)
    if scans.sup is not None:
        path = cfg.out / "sup_scan.csv"
        scans.sup.write_csv(path)
        report.record_artifact(path)
    report.add(scans.checks, overrides=cfg.tolerances)
    return _finish(cfg, report, t_start)


def cmd_report(cfg: ExperimentConfig) -> RunReport:
    """Merge the stage reports; missing stages are an error naming them."""
    missing = [s for s in STAGES if not (cfg.out / f"{s}_report.csv").exists()]
    if missing:
        raise DataError(f"missing stage outputs in {cfg.out}: {', '.join(f'{s}_report.csv' for s in missing)}")
    report = RunReport("report", config=cfg.echo())
    for s in STAGES:
        path = cfg.out / f"{s}_report.csv"
        for stage, rec in read_report_csv(path):
            report.add(rec, stage=stage)
        report.record_artifact(path)
    report.write(cfg.out, "report")
    return report


COMMANDS = {"sample": cmd_sample, "moments": cmd_moments, "mellin": cmd_mellin,
            "spectral": cmd_spectral, "report": cmd_report}


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zetamellin", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=list(COMMANDS))
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", help="worker processes for sampling")
    p.add_argument("--t0", help="start of the sampling range")
    p.add_argument("--t1", help="end of the sampling range")
    p.add_argument("--step", help="sampling step")
    p.add_argument("--sigma", help="comma-separated sigma list for lines and I_sigma")
    p.add_argument("--X", dest="X", help="truncation point of the x-integrals")
    p.add_argument("--tmax", help="line truncation for the identity checks")
    p.add_argument("--spectral-data", dest="spectral_data", help="CSV kappa,alpha,h_half,parity")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = read_config_file(args.config) if args.config else {}
    for key in ("out", "workers", "t0", "t1", "step", "sigma", "X", "tmax", "spectral_data"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    return ExperimentConfig.from_mapping(values)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        report = COMMANDS[args.command](cfg)
    except ZetaMellinError as exc:
        print(f"zetamellin {args.command}: error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(report.text().split("\n\n")[0] + "\n")
    if report.failed:
        print("failed: " + ", ".join(report.failed))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
