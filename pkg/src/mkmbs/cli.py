"""Benchmark runner: ``simulate``, ``compare``, ``convergence`` and ``plot``.

Settings come from an optional flat ``key = value`` file (``--config``) and
repeatable ``--set key=value`` overrides.  Exit codes: 0 on success, 2 for
configuration or usage errors, 3 when an integration fails.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .integrator import IntegrationError, Trajectory, builtin_tableaus, integrate
from .lie import Formulation
from .models import MODELS, build_model
from .oracle import AdaptiveSolverSettings, heavy_top_reference, orientation_error

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3

METRICS_HEADER = ["t", "g_max_abs", "g_j1", "g_j2", "g_j3", "T", "U", "E",
                  "T_rel_drift", "E_rel_drift", "ortho_err"]
TRAJECTORY_HEADER = (["t", "body"] + [f"r{i}{j}" for i in range(3) for j in range(3)]
                     + ["rx", "ry", "rz", "w1", "w2", "w3", "v1", "v2", "v3"])
DEFAULT_DTS = (4e-3, 2e-3, 1e-3, 5e-4)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: str = "heavy_top"
    formulation: str = "se3"
    dt: float = 1e-3
    t_end: float = 5.0
    tableau: str = "rk4"
    gravity: tuple[float, float, float] | None = None
    output_stride: int = 1
    output: str = "."
    dts: tuple[float, ...] = DEFAULT_DTS
    # Reference tolerances for convergence runs; the error being measured
    # reaches 1e-8, so the reference must be well below that.
    ref_rel_tol: float = 1e-11
    ref_abs_tol: float = 1e-13

    def validate(self) -> "RunConfig":
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {sorted(MODELS)}")
        try:
            Formulation.parse(self.formulation)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.tableau not in builtin_tableaus():
            raise ConfigError(
                f"unknown tableau {self.tableau!r}; choose from {sorted(builtin_tableaus())}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError("dt must be positive")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ConfigError("t_end must be non-negative")
        if self.output_stride < 1:
            raise ConfigError("output_stride must be at least 1")
        if any(not d > 0 for d in self.dts):
            raise ConfigError("dts must all be positive")
        if not (self.ref_rel_tol > 0 and self.ref_abs_tol > 0):
            raise ConfigError("reference tolerances must be positive")
        return self


def _parse_floats(text: str, count: int | None = None) -> tuple[float, ...]:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    vals = tuple(float(p) for p in parts)
    if count is not None and len(vals) != count:
        raise ValueError(f"expected {count} comma-separated numbers")
    return vals


_CONVERTERS = {
    "model": str.strip,
    "formulation": lambda s: s.strip().lower(),
    "dt": float,
    "t_end": float,
    "tableau": lambda s: s.strip().lower(),
    "gravity": lambda s: None if s.strip().lower() in ("", "none", "default")
    else _parse_floats(s, 3),
    "output_stride": int,
    "output": str.strip,
    "dts": _parse_floats,
    "ref_rel_tol": float,
    "ref_abs_tol": float,
}


def parse_assignments(lines, source: str) -> dict[str, str]:
    """``key = value`` pairs; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _CONVERTERS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def load_config(path: str | None, overrides: list[str], output: str | None) -> RunConfig:
    raw: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        raw.update(parse_assignments(text.splitlines(), path))
    raw.update(parse_assignments(overrides, "--set"))
    values = {}
    for key, text in raw.items():
        try:
            values[key] = _CONVERTERS[key](text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None
    cfg = replace(RunConfig(), **values)
    if output is not None:
        cfg = replace(cfg, output=output)
    return cfg.validate()


# --------------------------------------------------------------------------
# CSV output
# --------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    return "%.17g" % float(x)


def _rel(values: np.ndarray) -> np.ndarray:
    ref = values[0]
    if ref == 0.0:
        return np.full(values.shape, np.nan)
    return (values - ref) / abs(ref)


def metrics_rows(model, traj: Trajectory) -> list[list[str]]:
    E = traj.energy_array()
    T_drift = _rel(E[:, 0])
    E_drift = _rel(E[:, 2])
    slices = model.joint_slices()
    rows = []
    for k, t in enumerate(traj.times):
        g = traj.violations[k]
        joints = [float(np.linalg.norm(g[s])) for s in slices[:3]]
        joints += [None] * (3 - len(joints))
        g_max = float(np.max(np.abs(g))) if g.size else 0.0
        drifts = [None if math.isnan(v) else v for v in (T_drift[k], E_drift[k])]
        rows.append([_fmt(v) for v in [t, g_max, *joints, *E[k], *drifts, traj.ortho_error[k]]])
    return rows


def trajectory_rows(traj: Trajectory) -> list[list[str]]:
    rows = []
    for t, X in zip(traj.times, traj.states):
        for i in range(X.n):
            vals = [t, i, *X.q.R[i].reshape(9), *X.q.r[i], *X.V[i]]
            rows.append([_fmt(t), str(i)] + [_fmt(v) for v in vals[2:]])
    return rows


def write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# --------------------------------------------------------------------------
# Runs
# --------------------------------------------------------------------------

@dataclass
class RunResult:
    config: RunConfig
    model: object
    traj: Trajectory
    wall_time: float

    def joint_maxima(self) -> list[float]:
        g = self.traj.violation_array()
        return [float(np.max(np.linalg.norm(g[:, s], axis=1))) for s in self.model.joint_slices()]

    def final_drift(self, column: int = 0) -> float:
        E = self.traj.energy_array()[:, column]
        return abs(E[-1] - E[0]) / abs(E[0]) if E[0] != 0 else float("nan")


def run(cfg: RunConfig) -> RunResult:
    model, preset = build_model(cfg.model, cfg.formulation, cfg.gravity)
    X0 = preset.initial_state(model)
    start = time.perf_counter()
    traj = integrate(model, cfg.tableau, X0, 0.0, cfg.t_end, cfg.dt, cfg.output_stride)
    return RunResult(cfg, model, traj, time.perf_counter() - start)


def _stem(cfg: RunConfig) -> str:
    return f"{cfg.model}_{Formulation.parse(cfg.formulation).value}"


def cmd_simulate(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    res = run(cfg)
    outdir = Path(cfg.output)
    metrics = outdir / f"{_stem(cfg)}_metrics.csv"
    write_csv(metrics, METRICS_HEADER, metrics_rows(res.model, res.traj))
    write_csv(outdir / f"{_stem(cfg)}_trajectory.csv", TRAJECTORY_HEADER,
              trajectory_rows(res.traj))
    g = res.joint_maxima()
    print(f"{cfg.model} [{cfg.formulation}] {len(res.traj) - 1} steps of {cfg.dt:g} s "
          f"in {res.wall_time:.2f} s", file=out)
    print("max |g| per joint: " + ", ".join(f"{v:.3e}" for v in g), file=out)
    print(f"final T drift {res.final_drift(0):.3e}, E drift {res.final_drift(2):.3e}", file=out)
    print(f"wrote {metrics}", file=out)
    return EXIT_OK


def cmd_compare(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    results = {}
    for form in Formulation:
        results[form] = run(replace(cfg, formulation=form.value))
    rows = []
    for form, res in results.items():
        rows += [[form.value] + r for r in metrics_rows(res.model, res.traj)]
    path = Path(cfg.output) / f"{cfg.model}_compare.csv"
    write_csv(path, ["formulation"] + METRICS_HEADER, rows)
    print(f"{cfg.model}: dt={cfg.dt:g} s, t_end={cfg.t_end:g} s, tableau={cfg.tableau}", file=out)
    print(f"{'formulation':<12} {'joint':<8} {'max |g|':>12}", file=out)
    for form, res in results.items():
        for name, g in zip(_joint_names(res.model), res.joint_maxima()):
            print(f"{form.value:<12} {name:<8} {g:12.3e}", file=out)
    for form, res in results.items():
        print(f"{form.value:<12} T drift {res.final_drift(0):.3e}  E drift "
              f"{res.final_drift(2):.3e}  wall {res.wall_time:.2f} s", file=out)
    se3 = max(results[Formulation.SE3].joint_maxima())
    dp = max(results[Formulation.DIRECT_PRODUCT].joint_maxima())
    ratio = dp / se3 if se3 > 0 else float("inf")
    print(f"violation ratio so3xr3/se3: {ratio:.3g}", file=out)
    print(f"wrote {path}", file=out)
    return EXIT_OK


def _joint_names(model) -> list[str]:
    return [jt.name or f"j{k + 1}" for k, jt in enumerate(model.joints)]


def convergence_errors(cfg: RunConfig, t_end: float = 1.0) -> list[float]:
    """Orientation error at ``t_end`` against the quaternion reference, per step size."""
    if cfg.model != "heavy_top":
        raise ConfigError("convergence study is only available for heavy_top")
    if cfg.gravity is not None and any(cfg.gravity):
        raise ConfigError("convergence study needs the torque-free heavy top")
    ref = heavy_top_reference(t_end, AdaptiveSolverSettings(cfg.ref_rel_tol, cfg.ref_abs_tol))
    R_ref = ref.rotation(-1)
    model, preset = build_model(cfg.model, cfg.formulation)
    X0 = preset.initial_state(model)
    errors = []
    for dt in cfg.dts:
        try:
            traj = integrate(model, cfg.tableau, X0, 0.0, t_end, dt, output_stride=10**9)
        except IntegrationError:
            errors.append(math.nan)  # diverged
            continue
        errors.append(orientation_error(traj.final.q.R[0], R_ref))
    return errors


def loglog_slope(dts, errors) -> float:
    x, y = np.log(np.asarray(dts, float)), np.log(np.asarray(errors, float))
    return float(np.polyfit(x, y, 1)[0])


def cmd_convergence(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    if len(cfg.dts) < 2:
        raise ConfigError("convergence needs at least two step sizes")
    errors = convergence_errors(cfg)
    for dt, e in zip(cfg.dts, errors):
        msg = "diverged" if math.isnan(e) else f"orientation error {e:.6e}"
        print(f"dt={dt:<10g} {msg}", file=out)
    if any(math.isnan(e) for e in errors):
        print("slope undefined: integration diverged", file=out)
        return EXIT_INTEGRATION
    if not all(e > 0 for e in errors):
        print("slope undefined: zero error", file=out)
        return EXIT_OK
    print(f"slope {loglog_slope(cfg.dts, errors):.4f}", file=out)
    return EXIT_OK


# --------------------------------------------------------------------------
# SVG plot
# --------------------------------------------------------------------------

_WIDTH, _HEIGHT = 800, 480
_MARGIN = (70, 30, 30, 50)  # left, right, top, bottom
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def read_columns(path: Path, x: str, columns: list[str]) -> tuple[list, dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in [x, *columns] if c not in header]
        if missing:
            raise ConfigError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = list(reader)

    def num(s):
        try:
            return float(s)
        except ValueError:
            return math.nan

    return [num(r[x]) for r in rows], {c: [num(r[c]) for r in rows] for c in columns}


def render_svg(xs: list, series: dict, x_label: str, title: str = "") -> str:
    left, right, top, bottom = _MARGIN
    pw, ph = _WIDTH - left - right, _HEIGHT - top - bottom
    finite = [v for s in series.values() for v in s if math.isfinite(v)]
    fx = [v for v in xs if math.isfinite(v)]
    x0, x1 = (min(fx), max(fx)) if fx else (0.0, 1.0)
    y0, y1 = (min(finite), max(finite)) if finite else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
           f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
           f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for v, anchor in ((x0, "start"), (x1, "end")):
        out.append(f'<text x="{px(v):.2f}" y="{top + ph + 18}" font-size="12" '
                   f'text-anchor="{anchor}">{v:.4g}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{left - 6}" y="{py(v) + 4:.2f}" font-size="12" '
                   f'text-anchor="end">{v:.4g}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{_HEIGHT - 10}" font-size="14" '
               f'text-anchor="middle">{_escape(x_label)}</text>')
    if title:
        out.append(f'<text x="{left + pw / 2:.2f}" y="{top - 10}" font-size="14" '
                   f'text-anchor="middle">{_escape(title)}</text>')
    for k, (name, ys) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys)
                       if math.isfinite(a) and math.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                   f'points="{pts}"><title>{_escape(name)}</title></polyline>')
        out.append(f'<text x="{left + pw - 6}" y="{top + 16 + 16 * k}" font-size="12" '
                   f'fill="{color}" text-anchor="end">{_escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def cmd_plot(csv_path: str, columns: list[str], x: str, output: str, out=None) -> int:
    out = out or sys.stdout
    path = Path(csv_path)
    if not path.is_file():
        raise ConfigError(f"no such file: {csv_path}")
    xs, series = read_columns(path, x, columns)
    target = Path(output)
    if target.is_dir() or output.endswith(("/", "\\")):
        target = target / (path.stem + ".svg")
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(render_svg(xs, series, x, path.stem), encoding="utf-8")
    print(f"wrote {target}", file=out)
    return EXIT_OK


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value settings file")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                        dest="overrides", help="override one setting (repeatable)")
    common.add_argument("--output", metavar="DIR", help="directory for CSV output")

    parser = argparse.ArgumentParser(prog="mkmbs-bench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run one model and write CSVs")
    sub.add_parser("compare", parents=[common], help="run both formulations side by side")
    conv = sub.add_parser("convergence", parents=[common],
                          help="order estimate on the heavy top against the reference")
    conv.add_argument("--dts", help="comma-separated step sizes")
    plot = sub.add_parser("plot", help="SVG line chart of CSV columns")
    plot.add_argument("csv", help="input CSV")
    plot.add_argument("--columns", required=True, help="comma-separated y columns")
    plot.add_argument("--x", default="t", help="x column (default t)")
    plot.add_argument("--output", required=True, metavar="PATH", help="SVG file or directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            cols = [c.strip() for c in args.columns.split(",") if c.strip()]
            return cmd_plot(args.csv, cols, args.x, args.output)
        overrides = list(args.overrides)
        if getattr(args, "dts", None):
            overrides.append(f"dts={args.dts}")
        cfg = load_config(args.config, overrides, args.output)
        handler = {"simulate": cmd_simulate, "compare": cmd_compare,
                   "convergence": cmd_convergence}[args.command]
        return handler(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION


if __name__ == "__main__":
    sys.exit(main())
