"""Command-line front end: run tuning studies from config files, report results.

``kbesc run CONFIG`` executes one or more tuner arms (pure-standard and/or
kernel-based) against a configured plant and writes, per arm, the update
trace, the measurement dataset, and a decimated plant time series, plus a
comparison report and optional convergence figures.  ``kbesc report`` rebuilds
the comparison report from previously written trace CSVs.

Config files are flat ``key = value`` text with ``#`` comments.  Numeric keys
mirror the tuner parameters (c_v, mu_tilde, T, delta_bar, Gamma, c, mu_min,
mu_max, rho, sigma); see the bundled configs for complete examples.
"""

from __future__ import annotations

import argparse
import importlib
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import plant as plant_mod
from .esc import EscConfig, RunTrace, StepKind, run
from .kernels import KernelSpec

_ARM_NAMES = ("standard", "kernel")

_REQUIRED_NUMERIC = (
    "c_v", "mu_tilde", "T", "delta_bar", "Gamma", "c",
    "mu_min", "mu_max", "rho", "sigma",
)

_KNOWN_KEYS = set(_REQUIRED_NUMERIC) | {
    "name", "plant", "quadratic_center", "theta0", "x0", "k_bar", "arms",
    "kb_enabled", "dt", "seed", "timeseries_decimation", "stop_tol",
    "stop_patience",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed and validated study description."""

    name: str
    plant: str
    theta0: tuple
    x0: tuple | None
    k_bar: int
    arms: tuple
    c_v: float
    mu_tilde: float
    T: float
    delta_bar: float
    Gamma: float
    c: float
    mu_min: float
    mu_max: float
    rho: float
    sigma: float
    dt: float = plant_mod.DEFAULT_DT
    seed: int | None = None
    timeseries_decimation: int = 100
    stop_tol: float | None = None
    stop_patience: int = 0
    quadratic_center: tuple | None = None


def _parse_floats(raw: str) -> tuple:
    return tuple(float(tok) for tok in raw.replace(",", " ").split())


def parse_config_text(text: str, default_name: str = "study") -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    missing = [k for k in ("plant", "theta0", "k_bar") + _REQUIRED_NUMERIC if k not in raw]
    if missing:
        raise ValueError(f"missing required keys: {', '.join(missing)}")

    numbers = {k: float(raw[k]) for k in _REQUIRED_NUMERIC}

    if "arms" in raw:
        arms = tuple(tok.strip() for tok in raw["arms"].split(",") if tok.strip())
        bad = [a for a in arms if a not in _ARM_NAMES]
        if bad or not arms:
            raise ValueError(f"arms must be drawn from {_ARM_NAMES}, got {raw['arms']!r}")
        if len(set(arms)) != len(arms):
            raise ValueError("arms must not repeat")
    else:
        enabled = raw.get("kb_enabled", "true").strip().lower()
        if enabled not in ("true", "false"):
            raise ValueError("kb_enabled must be true or false")
        arms = ("kernel",) if enabled == "true" else ("standard",)

    return ExperimentConfig(
        name=raw.get("name", default_name),
        plant=raw["plant"],
        theta0=_parse_floats(raw["theta0"]),
        x0=_parse_floats(raw["x0"]) if "x0" in raw else None,
        k_bar=int(raw["k_bar"]),
        arms=arms,
        dt=float(raw.get("dt", plant_mod.DEFAULT_DT)),
        seed=int(raw["seed"]) if "seed" in raw else None,
        timeseries_decimation=int(raw.get("timeseries_decimation", 100)),
        stop_tol=float(raw["stop_tol"]) if "stop_tol" in raw else None,
        stop_patience=int(raw.get("stop_patience", 0)),
        quadratic_center=(
            _parse_floats(raw["quadratic_center"]) if "quadratic_center" in raw else None
        ),
        **numbers,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config_text(path.read_text(), default_name=path.stem)


def resolve_config(name_or_path: str) -> Path:
    """Accept a filesystem path or the name of a bundled config."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    base = resources.files("kbesc") / "configs"
    for candidate in (name_or_path, name_or_path + ".cfg"):
        target = base / candidate
        if target.is_file():
            return Path(str(target))
    raise FileNotFoundError(
        f"no such config file or bundled config: {name_or_path!r}"
    )


def bundled_configs() -> list[str]:
    base = resources.files("kbesc") / "configs"
    return sorted(p.name[: -len(".cfg")] for p in base.iterdir() if p.name.endswith(".cfg"))


def build_model(cfg: ExperimentConfig) -> plant_mod.PlantModel:
    if cfg.plant == "two_state_benchmark":
        return plant_mod.two_state_benchmark()
    if cfg.plant == "static_quadratic":
        center = np.array(
            cfg.quadratic_center
            if cfg.quadratic_center is not None
            else (0.0,) * len(cfg.theta0)
        )
        if center.shape != (len(cfg.theta0),):
            raise ValueError("quadratic_center dimension does not match theta0")

        def bowl(theta):
            d = np.asarray(theta, dtype=float) - center
            return float(d @ d)

        return plant_mod.static_map(bowl, len(cfg.theta0), minimizer=center)
    if ":" in cfg.plant:
        mod_name, attr = cfg.plant.split(":", 1)
        obj = getattr(importlib.import_module(mod_name), attr)
        model = obj() if callable(obj) and not isinstance(obj, plant_mod.PlantModel) else obj
        if not isinstance(model, plant_mod.PlantModel):
            raise TypeError(f"{cfg.plant} did not produce a PlantModel")
        return model
    raise ValueError(f"unknown plant selector {cfg.plant!r}")


def esc_config(cfg: ExperimentConfig, kb_enabled: bool) -> EscConfig:
    return EscConfig(
        kernel=KernelSpec(length_scale=cfg.sigma),
        dither_amplitude=cfg.c_v,
        standard_gain=cfg.mu_tilde,
        waiting_time=cfg.T,
        tube_half_width=cfg.delta_bar,
        norm_bound=cfg.Gamma,
        armijo_c=cfg.c,
        gain_min=cfg.mu_min,
        gain_max=cfg.mu_max,
        backtrack=cfg.rho,
        max_updates=cfg.k_bar,
        kb_enabled=kb_enabled,
        dt=cfg.dt,
        stop_tol=cfg.stop_tol,
        stop_patience=cfg.stop_patience,
    )


class _TimeseriesWriter:
    """Collects decimated (t, x, theta, y) rows during a run."""

    def __init__(self, state_dim: int, input_dim: int):
        self.state_dim = state_dim
        self.input_dim = input_dim
        self.rows: list[tuple] = []

    def __call__(self, t, x, theta, y):
        self.rows.append((t, tuple(x), tuple(theta), y))

    def write(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["t"]
                + [f"x_{j + 1}" for j in range(self.state_dim)]
                + [f"theta_{j + 1}" for j in range(self.input_dim)]
                + ["y"]
            )
            for t, x, theta, y in self.rows:
                writer.writerow(
                    [repr(float(t))]
                    + [repr(float(v)) for v in x]
                    + [repr(float(v)) for v in theta]
                    + [repr(float(y))]
                )


def _arm_summary(trace: RunTrace) -> dict:
    kernel_recs = trace.kernel_records()
    last = trace.records[-1]
    return {
        "updates": len(trace.records),
        "measurements": trace.total_measurements,
        "kernel_steps": len(kernel_recs),
        "kernel_update_indices": [r.index for r in kernel_recs],
        "kernel_gains": [r.gain for r in kernel_recs],
        "final_theta": [float(v) for v in last.theta_after],
        "final_f_true": last.f_true,
    }


def build_report(traces: dict) -> dict:
    """Comparison report over named arm traces.

    When a pure-standard baseline and a kernel-enabled arm are both present,
    the kernel arm's cost-to-reach is the earliest update whose truth value
    is at least as good as the baseline's final one, and the reductions
    compare that point against the baseline totals.
    """
    report: dict = {"arms": {name: _arm_summary(tr) for name, tr in traces.items()}}
    baseline = None
    if "standard" in traces:
        baseline = "standard"
    else:
        for name, tr in traces.items():
            if not tr.kernel_records():
                baseline = name
                break
    contender = next((n for n in traces if n != baseline), None)
    if baseline is None or contender is None:
        report["comparison"] = None
        return report

    base_tr = traces[baseline]
    cont_tr = traces[contender]
    base_final = base_tr.records[-1].f_true
    if base_final is None or any(r.f_true is None for r in cont_tr.records):
        report["comparison"] = {
            "baseline": baseline,
            "note": "truth map unavailable; no reach comparison",
        }
        return report

    reach = None
    for r in cont_tr.records:
        if r.f_true <= base_final:
            reach = r
            break
    comparison = {
        "baseline": baseline,
        "contender": contender,
        "baseline_updates": len(base_tr.records),
        "baseline_measurements": base_tr.total_measurements,
    }
    if reach is None:
        comparison["reached"] = False
    else:
        comparison.update(
            reached=True,
            reach_update=reach.index,
            reach_measurements=reach.measurements,
            update_reduction_pct=100.0 * (1.0 - reach.index / len(base_tr.records)),
            measurement_reduction_pct=100.0
            * (1.0 - reach.measurements / base_tr.total_measurements),
        )
    report["comparison"] = comparison
    return report


def _plot_convergence(traces: dict, outdir: Path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n = len(next(iter(traces.values())).records[0].theta_after)
    for xaxis, fname in (
        ("measurements", "fig_theta_vs_measurements.svg"),
        ("updates", "fig_theta_vs_updates.svg"),
    ):
        fig, axes = plt.subplots(n, 1, sharex=True, figsize=(6.0, 2.2 * n), squeeze=False)
        for name, tr in traces.items():
            xs = [r.measurements if xaxis == "measurements" else r.index for r in tr.records]
            for j in range(n):
                ys = [float(r.theta_after[j]) for r in tr.records]
                ax = axes[j][0]
                ax.step(xs, ys, where="post", label=name)
                kern = [(x, y) for x, y, r in zip(xs, ys, tr.records) if r.kind is StepKind.KERNEL]
                if kern:
                    ax.plot(*zip(*kern), "o", ms=4, label=f"{name} (surrogate steps)")
        for j in range(n):
            axes[j][0].set_ylabel(f"theta_hat[{j + 1}]")
            axes[j][0].grid(alpha=0.3)
        axes[-1][0].set_xlabel(xaxis)
        axes[0][0].legend(loc="best", fontsize=8)
        fig.tight_layout()
        fig.savefig(outdir / fname)
        plt.close(fig)


def cmd_run(args) -> int:
    cfg_path = resolve_config(args.config)
    cfg = load_config(cfg_path)
    if args.validate_only:
        build_model(cfg)
        for arm in cfg.arms:
            esc_config(cfg, kb_enabled=arm != "standard")
        print(f"config {cfg.name} OK: arms={','.join(cfg.arms)}, k_bar={cfg.k_bar}")
        return 0

    outdir = Path(args.out) if args.out else Path(f"{cfg.name}_out")
    outdir.mkdir(parents=True, exist_ok=True)
    model = build_model(cfg)

    traces: dict[str, RunTrace] = {}
    for arm in cfg.arms:
        writer = _TimeseriesWriter(model.state_dim, model.input_dim)
        trace = run(
            model,
            esc_config(cfg, kb_enabled=arm != "standard"),
            cfg.theta0,
            x0=cfg.x0,
            observer=writer,
            observe_every=cfg.timeseries_decimation,
        )
        traces[arm] = trace
        trace.to_csv(outdir / f"trace_{arm}.csv")
        trace.data.to_csv(outdir / f"dataset_{arm}.csv")
        writer.write(outdir / f"timeseries_{arm}.csv")
        summary = _arm_summary(trace)
        print(
            f"arm {arm}: {summary['updates']} updates, "
            f"{summary['measurements']} measurements, "
            f"{summary['kernel_steps']} surrogate steps, "
            f"final theta_hat = {summary['final_theta']}"
        )

    report = build_report(traces)
    with open(outdir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    comparison = report.get("comparison")
    if comparison and comparison.get("reached"):
        print(
            f"{comparison['contender']} arm matches the {comparison['baseline']} arm's "
            f"final cost at update {comparison['reach_update']} "
            f"({comparison['reach_measurements']} measurements): "
            f"{comparison['update_reduction_pct']:.1f}% fewer updates, "
            f"{comparison['measurement_reduction_pct']:.1f}% fewer measurements"
        )
    if not args.no_plots:
        _plot_convergence(traces, outdir)
    print(f"artifacts written to {outdir}")
    return 0


def cmd_report(args) -> int:
    traces = {}
    for path in args.traces:
        p = Path(path)
        name = p.stem
        if name.startswith("trace_"):
            name = name[len("trace_"):]
        traces[name] = RunTrace.from_csv(p)
    report = build_report(traces)
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kbesc",
        description="Extremum seeking with certified surrogate gradient steps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a tuning study from a config file")
    p_run.add_argument("config", help="config path or bundled name "
                                      f"({', '.join(bundled_configs())})")
    p_run.add_argument("--out", help="output directory (default <name>_out)")
    p_run.add_argument("--validate-only", action="store_true",
                       help="parse and validate the config, then exit")
    p_run.add_argument("--no-plots", action="store_true",
                       help="skip figure generation")
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("report", help="rebuild a comparison report from trace CSVs")
    p_rep.add_argument("traces", nargs="+", help="trace CSV files")
    p_rep.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
