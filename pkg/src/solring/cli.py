"""Experiment orchestration: named recipes, flat configs, CSV/JSON outputs.

Each experiment is a deterministic function of its configuration: all
randomness flows from (master_seed, trajectory index), every numerical
parameter is echoed into the run manifest, and CSVs are written with
round-trip-exact float formatting, so the same config + seed reproduces
byte-identical result files.

Experiments:
  barrier_fisher  Fisher-information time series for the barrier collision
                  (noninteracting and attractive-soliton cases)
  ring_sweep      single-loop TW sensitivity over a g0 list (+ two-mode curve)
  pretwist_sweep  pre-twisting scheme over a g0 list (theta policy: fixed /
                  theta_chi / optimize)
  two_mode_curves closed-form two-mode sensitivity and moments vs chi*T
  quasiprob       two-mode TW quasi-probability clouds (4-stage sequence)
  theta_opt       Delta-Omega(theta) scan + numerical optimum at one g0
  barrier_tune    bisection for the 50%-reflection barrier height
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import BlowUpError, ConfigError, SolringError
from .interferometer import (
    RingConfig,
    SensitivityRecord,
    optimize_theta,
    run_pretwist_loop,
    run_single_component_barrier_loop,
    run_single_loop,
    tune_barrier,
)
from .fisher import BarrierScenario, find_balanced_phase, fisher_time_series
from .twomode import (
    TwoModeParams,
    benchmark_sensitivity,
    chi_from_g0,
    coherent_moments,
    delta_omega_two_mode,
    fock_oracle_moments,
    mean_jx_analytic,
    theta_chi,
    two_mode_tw,
    var_jy_analytic,
)

EXPERIMENTS = (
    "barrier_fisher",
    "ring_sweep",
    "pretwist_sweep",
    "two_mode_curves",
    "quasiprob",
    "theta_opt",
    "barrier_tune",
)


@dataclass
class ExperimentConfig:
    """Flat, fully-echoed configuration of one run.

    master_seed is mandatory (no silent default): provenance requires it.
    """

    experiment: str
    master_seed: Optional[int] = None
    out_dir: str = "."
    threads: int = 1

    # ring gyroscope
    n_total: float = 1.0e4
    winding: int = 80
    radius: float = 1.0
    g0_list: tuple[float, ...] = (-1e-3, -2.5e-3, -4.4e-3, -6e-3, -8.8e-3)
    scheme: str = "single_loop"  # ring_sweep: single_loop | single_component_barrier
    shape: str = "auto"
    sigma: float = 0.3
    n_points: int = 512
    steps_per_loop: int = 20000
    n_traj: int = 200
    d_omega: Optional[float] = None
    theta_policy: str = "theta_chi"  # pretwist_sweep: fixed | theta_chi | optimize
    theta_value: float = 0.0
    theta_meaning: str = "spin"
    theta_grid_points: int = 17

    # barrier (fisher + tuning + single-component scheme)
    k: float = 10.0
    w: float = 1e-2
    v0: Optional[float] = None
    g0n: float = -8.0
    soliton_width: float = 0.5
    box_length: float = 40.0
    fisher_n_points: int = 1 << 14
    fisher_dt: float = 2e-4
    t_final: float = 1.0
    n_samples: int = 40
    d_phi: float = 1e-3

    # two-mode experiments
    chi_t_list: tuple[float, ...] = (-0.03, -0.06)
    cloud_traj: int = 400

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"experiment: {self.experiment!r} not one of {EXPERIMENTS}"
            )
        if self.master_seed is None:
            raise ConfigError("master_seed: required (determinism contract)")
        if self.n_traj < 2:
            raise ConfigError("n_traj: need at least 2 trajectories")
        if self.n_total <= 0:
            raise ConfigError("n_total: must be positive")
        if self.threads < 1:
            raise ConfigError("threads: must be >= 1")
        if self.steps_per_loop < 1:
            raise ConfigError("steps_per_loop: must be >= 1")
        if self.theta_policy not in ("fixed", "theta_chi", "optimize"):
            raise ConfigError(f"theta_policy: {self.theta_policy!r} invalid")
        if self.scheme not in ("single_loop", "single_component_barrier"):
            raise ConfigError(f"scheme: {self.scheme!r} invalid")
        if any(g > 0 for g in self.g0_list):
            raise ConfigError("g0_list: attractive (<= 0) couplings only")

    def ring_config(self, g0: float, seed_offset: int = 0) -> RingConfig:
        return RingConfig(
            n_total=self.n_total,
            winding=self.winding,
            radius=self.radius,
            g0=g0,
            n_points=self.n_points,
            n_traj=self.n_traj,
            master_seed=self.master_seed + seed_offset,
            steps_per_loop=self.steps_per_loop,
            d_omega=self.d_omega,
            shape=self.shape,
            sigma=self.sigma,
            theta_meaning=self.theta_meaning,
            workers=self.threads,
            barrier_v0=self.v0,
            barrier_w=self.w,
        )


_TUPLE_FIELDS = ("g0_list", "chi_t_list")
_OPTIONAL_FLOATS = ("d_omega", "v0")
_OPTIONAL_INTS = ("master_seed",)


def parse_config_text(text: str, experiment: Optional[str] = None) -> ExperimentConfig:
    """Parse a flat `key = value` config (a '#' starts a comment)."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    if experiment is not None:
        values.setdefault("experiment", experiment)
    return config_from_dict(values)


def config_from_dict(values: dict) -> ExperimentConfig:
    known = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    kwargs = {}
    for key, val in values.items():
        if key not in known:
            raise ConfigError(f"{key}: unknown configuration key")
        kwargs[key] = _coerce(key, val)
    if "experiment" not in kwargs:
        raise ConfigError("experiment: required")
    return ExperimentConfig(**kwargs)


def _coerce(key: str, val):
    if isinstance(val, (int, float, tuple, list)) or val is None:
        if key in _TUPLE_FIELDS and val is not None:
            return tuple(float(v) for v in val)
        return val
    s = str(val).strip()
    if s.lower() in ("none", ""):
        return None
    if key in _TUPLE_FIELDS:
        return tuple(float(tok) for tok in s.replace(",", " ").split())
    if key in _OPTIONAL_INTS:
        return int(s)
    if key in _OPTIONAL_FLOATS:
        return float(s)
    default = next(
        f.default for f in dataclasses.fields(ExperimentConfig) if f.name == key
    )
    if isinstance(default, bool):
        return s.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(s)
    if isinstance(default, float):
        return float(s)
    return s


def config_to_dict(config: ExperimentConfig) -> dict:
    out = {}
    for f in dataclasses.fields(ExperimentConfig):
        v = getattr(config, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


# ---------------------------------------------------------------------------
# CSV helpers (round-trip-exact floats)
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


_SWEEP_HEADER = [
    "g0",
    "scheme",
    "theta",
    "delta_omega",
    "delta_omega_stderr",
    "n_traj",
    "d_omega_step",
    "seed",
]


def _sweep_row(rec: SensitivityRecord) -> tuple:
    return (
        rec.g0,
        rec.scheme,
        rec.theta,
        rec.delta_omega,
        rec.delta_omega_stderr,
        rec.n_traj,
        rec.d_omega,
        rec.master_seed,
    )


# ---------------------------------------------------------------------------
# Experiment recipes
# ---------------------------------------------------------------------------


def _run_ring_sweep(config: ExperimentConfig, out: Path) -> dict:
    rows = []
    tm_rows = []
    for g0 in config.g0_list:
        ring = config.ring_config(g0)
        if config.scheme == "single_component_barrier":
            rec = run_single_component_barrier_loop(ring)
        else:
            rec = run_single_loop(ring)
        rows.append(_sweep_row(rec))
        params = ring.two_mode_params()
        tm_rows.append((g0, params.chi_t, delta_omega_two_mode(params, config.radius)))
    write_csv(out / "sweep.csv", _SWEEP_HEADER, rows)
    write_csv(out / "two_mode_reference.csv", ["g0", "chi_t", "delta_omega_tm"], tm_rows)
    return {
        "points": len(rows),
        "benchmark": benchmark_sensitivity(config.n_total, config.radius),
        "outputs": ["sweep.csv", "two_mode_reference.csv"],
    }


def _run_pretwist_sweep(config: ExperimentConfig, out: Path) -> dict:
    rows = []
    for g0 in config.g0_list:
        ring = config.ring_config(g0)
        if config.theta_policy == "fixed":
            theta = config.theta_value
        elif config.theta_policy == "theta_chi":
            theta = theta_chi(ring.two_mode_params())
        else:
            grid = np.linspace(-math.pi, math.pi, config.theta_grid_points, endpoint=False)
            theta, _ = optimize_theta(ring, grid)
        rec = run_pretwist_loop(ring, theta)
        rows.append(_sweep_row(rec))
    write_csv(out / "sweep.csv", _SWEEP_HEADER, rows)
    return {"points": len(rows), "outputs": ["sweep.csv"]}


def _run_two_mode_curves(config: ExperimentConfig, out: Path) -> dict:
    curve = []
    for chi_t in config.chi_t_list:
        params = TwoModeParams(config.n_total, chi_t)
        curve.append(
            (
                chi_t,
                var_jy_analytic(params),
                mean_jx_analytic(params),
                delta_omega_two_mode(params, config.radius),
            )
        )
    write_csv(
        out / "two_mode_curve.csv",
        ["chi_t", "var_jy", "jx_mean", "delta_omega"],
        curve,
    )
    outputs = ["two_mode_curve.csv"]

    if config.n_total <= 400:
        rows = []
        for chi_t in config.chi_t_list:
            params = TwoModeParams(config.n_total, chi_t)
            cm = coherent_moments(params)
            fm = fock_oracle_moments(params)
            res = two_mode_tw(
                params, [("twist", chi_t)], config.cloud_traj, config.master_seed
            )
            tw = res.stages[-1].moments()
            stderr = math.sqrt(2.0 / (config.cloud_traj - 1))
            for name, a, o, t, terr in (
                ("var_jy", cm.spin_moments().jy_var, fm.spin_moments().jy_var,
                 tw.jy_var, tw.jy_var * stderr),
                ("jx_mean", cm.jx_mean, fm.jx_mean, tw.jx_mean,
                 abs(tw.jx_mean) * stderr),
                ("var_jz", cm.spin_moments().jz_var, fm.spin_moments().jz_var,
                 tw.jz_var, tw.jz_var * stderr),
            ):
                rows.append((config.n_total, chi_t, name, a, o, t, terr))
        write_csv(
            out / "moments.csv",
            ["n_total", "chi_t", "quantity", "analytic", "oracle", "tw_estimate",
             "tw_stderr"],
            rows,
        )
        outputs.append("moments.csv")
    return {"points": len(curve), "outputs": outputs}


def _run_quasiprob(config: ExperimentConfig, out: Path) -> dict:
    outputs = []
    for chi_t in config.chi_t_list:
        params = TwoModeParams(config.n_total, chi_t)
        theta = theta_chi(params)
        seq = [("twist", chi_t), ("rotate", theta), ("twist", chi_t)]
        res = two_mode_tw(params, seq, config.cloud_traj, config.master_seed)
        rows = []
        for stage in res.stages:
            for i in range(config.cloud_traj):
                rows.append(
                    (i, stage.label, stage.jx[i], stage.jy[i], stage.jz[i])
                )
        name = f"cloud_chiT_{chi_t!r}.csv"
        write_csv(out / name, ["trajectory_index", "stage", "jx", "jy", "jz"], rows)
        outputs.append(name)
    return {"chi_t_points": len(config.chi_t_list), "outputs": outputs}


def _run_theta_opt(config: ExperimentConfig, out: Path) -> dict:
    g0 = config.g0_list[0]
    ring = config.ring_config(g0)
    grid = np.linspace(-math.pi, math.pi, config.theta_grid_points, endpoint=False)
    records: dict[float, SensitivityRecord] = {}

    from .twomode import two_mode_sensitivity

    params = ring.two_mode_params()

    def evaluator(theta: float) -> SensitivityRecord:
        est = two_mode_sensitivity(
            params,
            loops=2,
            theta=theta,
            d_omega=ring.d_omega_value,
            n_traj=max(2000, config.n_traj),
            master_seed=config.master_seed,
            radius=config.radius,
        )
        rec = SensitivityRecord.from_estimate(ring, "pretwist_two_mode", theta, est)
        records[theta] = rec
        return rec

    theta_opt, best = optimize_theta(ring, grid, evaluator=evaluator)
    rows = [
        (t, r.delta_omega, r.delta_omega_stderr)
        for t, r in sorted(records.items())
    ]
    write_csv(out / "theta_scan.csv", ["theta", "delta_omega", "delta_omega_stderr"], rows)
    return {
        "g0": g0,
        "theta_opt": theta_opt,
        "delta_omega_opt": best.delta_omega,
        "theta_chi": theta_chi(params),
        "outputs": ["theta_scan.csv"],
    }


def _run_barrier_tune(config: ExperimentConfig, out: Path) -> dict:
    v0 = tune_barrier(config.k, config.w)
    write_csv(out / "barrier.csv", ["k", "w", "v0"], [(config.k, config.w, v0)])
    return {"v0": v0, "outputs": ["barrier.csv"]}


def _run_barrier_fisher(config: ExperimentConfig, out: Path) -> dict:
    v0 = config.v0 if config.v0 is not None else tune_barrier(config.k, config.w)
    common = dict(
        v0=v0,
        w=config.w,
        sigma=config.sigma if config.sigma != 0.3 else 0.5,
        k=config.k,
        box_length=config.box_length,
        n_points=config.fisher_n_points,
        dt=config.fisher_dt,
    )
    outputs = []
    summary = {"v0": v0}
    for label, kw in (
        ("case1", dict(g0n=0.0, kind="gaussian")),
        ("case2", dict(g0n=config.g0n, kind="soliton",
                       soliton_width=config.soliton_width)),
    ):
        scenario = BarrierScenario(**common, **kw)
        phi = find_balanced_phase(scenario, config.t_final)
        series = fisher_time_series(
            scenario, phi, config.t_final, config.n_samples, config.d_phi
        )
        name = f"fisher_{label}.csv"
        series.write_csv(out / name)
        outputs.append(name)
        summary[label] = {
            "phi": phi,
            "f_q_final": float(series.f_q[-1]),
            "f_c_final": float(series.f_c[-1]),
            "f_c_x_final": float(series.f_c_x[-1]),
            "qcrb_violated": bool(series.qcrb_violated.any()),
        }
    summary["outputs"] = outputs
    return summary


_RECIPES = {
    "barrier_fisher": _run_barrier_fisher,
    "ring_sweep": _run_ring_sweep,
    "pretwist_sweep": _run_pretwist_sweep,
    "two_mode_curves": _run_two_mode_curves,
    "quasiprob": _run_quasiprob,
    "theta_opt": _run_theta_opt,
    "barrier_tune": _run_barrier_tune,
}


def run(config: ExperimentConfig) -> dict:
    """Execute a validated config; writes outputs + manifest, returns summary."""
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    summary = _RECIPES[config.experiment](config, out)
    manifest = {
        "experiment": config.experiment,
        "package_version": __version__,
        "config": config_to_dict(config),
        "summary": summary,
        "wall_time_s": time.perf_counter() - t0,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def load_config(path: str, experiment: Optional[str] = None) -> ExperimentConfig:
    """Load a flat key=value config or a manifest.json (its config block)."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        values = data.get("config", data)
        if experiment is not None:
            values["experiment"] = values.get("experiment", experiment)
        return config_from_dict(values)
    return parse_config_text(text, experiment)


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="solring",
        description="Bright-soliton ring interferometry experiments "
        "(natural units hbar = m = 1)",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="flat key=value file or manifest.json")
        p.add_argument("--seed", type=int, default=None, help="master seed (mandatory here or in the config)")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        if args.config is not None:
            config = load_config(args.config, args.experiment)
            config.experiment = args.experiment
        else:
            config = ExperimentConfig(experiment=args.experiment)
        if args.seed is not None:
            config.master_seed = args.seed
        if args.out is not None:
            config.out_dir = args.out
        if args.threads is not None:
            config.threads = args.threads
        manifest = run(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except BlowUpError as exc:
        print(f"numerical blow-up: {exc}", file=sys.stderr)
        return 3
    except SolringError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(json.dumps(manifest["summary"], indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
