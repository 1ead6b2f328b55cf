"""Batch experiment driver.

Usage::

    resadp oracle|learn|simulate|bound|sweep --config CFG [--out DIR] [--seed N]

Every run writes into ``<out>/<command>-<config digest>/``.  Exit codes: 0 ok,
2 validation, 3 numerical failure, 4 excitation/rank failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import matrix_kit as mk
from .closed_loop_sim import (SinusoidExploration, simulate_learning, simulate_regulation,
                              tracking_metrics)
from .config import ExperimentConfig
from .dos import verify_assumptions
from .errors import ConfigurationError, DimensionError, ResadpError
from .learner import TrajectoryLog, run_algorithm_1
from .optimal_control import compute_resilience_bound, round_gain, solve_oracle
from .plant import build_augmented, check_assumptions, solve_regulator_equations

log = logging.getLogger("resadp")


def _fmt(v) -> str:
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(repr(float(x)) for x in np.ravel(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_report(path, items: dict):
    Path(path).write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in items.items()))


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = v
    return out


@dataclass
class Context:
    """Everything model-side a command needs, built once per config."""

    cfg: ExperimentConfig
    base: Path | None
    plant: object = None
    im: object = None
    aug: object = None
    cost: object = None
    oracle: object = None

    @classmethod
    def build(cls, cfg: ExperimentConfig, base=None) -> "Context":
        plant, im = cfg.plant()
        check_assumptions(plant).raise_if_failed()
        aug = build_augmented(plant, im)
        cost = cfg.cost(aug.dim)
        oracle = solve_oracle(aug, cost)
        return cls(cfg, base, plant, im, aug, cost, oracle)

    def K0(self):
        if self.cfg.K0 is not None:
            return np.array(self.cfg.K0, dtype=float).reshape(1, -1)
        return round_gain(self.oracle.K_star, 2)

    def bound(self):
        return compute_resilience_bound(self.oracle, self.aug, self.cost, self.cfg.kappa)


def run_dir(out_root, command: str, cfg: ExperimentConfig) -> Path:
    d = Path(out_root) / f"{command}-{cfg.digest()}"
    d.mkdir(parents=True, exist_ok=True)
    cfg.save(d / "config.txt")
    return d


def cmd_oracle(cfg: ExperimentConfig, out_root, base=None) -> Path:
    ctx = Context.build(cfg, base)
    out = run_dir(out_root, "oracle", cfg)
    sol = ctx.oracle
    bound = ctx.bound()
    write_report(out / "oracle_report.txt", {
        "K_star": sol.K_star,
        "P_star_vecs": mk.vecs(sol.P_star),
        "dare_residual": sol.dare_residual,
        "iterations": sol.iterations,
        "closed_loop_spectral_radius": mk.spectral_radius(ctx.aug.Abar - ctx.aug.Bbar @ sol.K_star),
        "T_star": bound.T_star,
    })
    return out


def cmd_bound(cfg: ExperimentConfig, out_root, base=None) -> Path:
    ctx = Context.build(cfg, base)
    out = run_dir(out_root, "bound", cfg)
    bound = ctx.bound()
    text = bound.to_text()
    text += f"T = {cfg.T!r}\n"
    text += f"delta_of_T = {bound.delta_of_T(cfg.T)!r}\n"
    text += f"condition_holds = {str(bound.condition_holds(cfg.T)).lower()}\n"
    (out / "bound_report.txt").write_text(text)
    return out


def _learning_phase(ctx: Context):
    cfg = ctx.cfg
    plant, im = ctx.plant, ctx.im
    sched = cfg.schedule(cfg.learn_ks + cfg.regulation_horizon, ctx.base)
    x0, z0, w0 = cfg.initial_conditions(plant)
    explore = SinusoidExploration(cfg.exploration_amplitude, cfg.exploration_waves, cfg.seed)
    K0 = ctx.K0()
    trace, tlog = simulate_learning(plant, im, sched, K0, explore, x0, z0, w0, cfg.learn_ks,
                                    explore_during_attack=cfg.explore_during_attack)
    keep = tlog.instants >= cfg.learn_k0
    tlog = TrajectoryLog(tlog.instants[keep], tlog.zeta[keep], tlog.zeta_next[keep],
                         tlog.u[keep], tlog.w[keep])
    result = run_algorithm_1(tlog, ctx.cost, K0, cfg.epsilon0, cfg.max_iter)
    return sched, trace, tlog, result


def cmd_learn(cfg: ExperimentConfig, out_root, base=None) -> Path:
    ctx = Context.build(cfg, base)
    sched, trace, tlog, result = _learning_phase(ctx)
    out = run_dir(out_root, "learn", cfg)
    sched.save(out / "schedule.txt")
    trace.write_csv(out / "learning_trace.csv")
    K_ref, P_ref = ctx.oracle.K_star, ctx.oracle.P_star
    with open(out / "history.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["j", "K_error", "P_error", "residual"])
        for j, dk, dp, res in result.history_rows(K_ref, P_ref):
            wr.writerow([j, repr(dk), repr(dp), repr(res)])
    rel = float(np.linalg.norm(result.K_final - K_ref) / np.linalg.norm(K_ref))
    write_report(out / "learned_gain.txt", {
        "K_learned": result.K_final,
        "P_learned_vecs": mk.vecs(result.P_final),
        "iterations": result.iterations,
        "samples": len(tlog),
        "dropped_columns": " ".join(map(str, result.dropped_columns)) or "none",
        "K_initial": ctx.K0(),
        "K_oracle": K_ref,
        "relative_gain_error": rel,
    })
    return out


def load_gain(path, dim: int) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"gain file {path} does not exist")
    items = read_report(path)
    text = None
    for key in ("K", "K_learned", "K_star"):
        if key in items:
            text = items[key]
            break
    if text is None:
        text = path.read_text().strip()
    try:
        K = np.array([float(v) for v in text.split()])
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse gain file {path}: {exc}") from exc
    if K.size != dim:
        raise DimensionError(f"gain file has {K.size} entries, expected {dim}")
    return K.reshape(1, -1)


def cmd_simulate(cfg: ExperimentConfig, out_root, gain: str = "oracle", gain_file=None,
                 base=None) -> Path:
    ctx = Context.build(cfg, base)
    plant, im = ctx.plant, ctx.im
    bound = ctx.bound()
    H = cfg.regulation_horizon
    if gain == "learned":
        sched, ltrace, _, result = _learning_phase(ctx)
        K = result.K_final
        # regulation picks up where learning stopped; z is carried over
        x0, z0, w0 = ltrace.x[-1], ltrace.z[-1], ltrace.w[-1]
        reg_sched = sched.shifted(cfg.learn_ks)
    else:
        if gain == "oracle":
            K = ctx.oracle.K_star
        elif gain == "file":
            if gain_file is None:
                raise ConfigurationError("--gain file needs --gain-file")
            K = load_gain(gain_file, ctx.aug.dim)
        else:
            raise ConfigurationError(f"unknown gain source {gain!r}")
        x0, z0, w0 = cfg.initial_conditions(plant)
        reg_sched = cfg.schedule(H, ctx.base)
        ltrace = None
    reg = solve_regulator_equations(plant, im, K=K)
    trace = simulate_regulation(plant, im, reg_sched, K, reg, x0, z0, w0, H,
                                P_star=ctx.oracle.P_star, bound=bound, T=cfg.T)
    metrics = tracking_metrics(trace)
    sched_ok = verify_assumptions(reg_sched, cfg.dos_params(), H).duration_ok
    out = run_dir(out_root, f"simulate-{gain}", cfg)
    if ltrace is not None:
        ltrace.write_csv(out / "learning_trace.csv")
    reg_sched.save(out / "schedule.txt")
    trace.write_csv(out / "trace.csv")
    write_report(out / "metrics.txt", {
        "gain_source": gain,
        "K": K,
        "final_quarter_max_abs_e": metrics.final_quarter_max_abs_e,
        "first_below_tol": metrics.first_below_tol,
        "peak_envelope_ratio": metrics.peak_envelope_ratio,
        "envelope_dominated": str(metrics.envelope_dominated()).lower(),
        "T": cfg.T,
        "T_star": bound.T_star,
        "bound_condition_holds": str(bound.condition_holds(cfg.T) and sched_ok).lower(),
        "attacked_instants": int(trace.attacked.sum()),
    })
    return out


COMMANDS = {"oracle": cmd_oracle, "learn": cmd_learn, "bound": cmd_bound}


def _run_one(command, cfg_path, out_root, seed, gain, gain_file):
    cfg_path = Path(cfg_path)
    cfg = ExperimentConfig.load(cfg_path).with_seed(seed)
    root = out_root if out_root is not None else cfg_path.parent / cfg.output_dir
    base = cfg_path.parent
    if command == "simulate":
        return cmd_simulate(cfg, root, gain, gain_file, base=base)
    return COMMANDS[command](cfg, root, base=base)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="resadp", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=["oracle", "learn", "simulate", "bound", "sweep"])
    ap.add_argument("--config", action="append", required=True,
                    help="config file (repeat for sweep)")
    ap.add_argument("--out", default=None, help="output root directory")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--gain", choices=["oracle", "learned", "file"], default="oracle",
                    help="gain source for simulate")
    ap.add_argument("--gain-file", default=None)
    ap.add_argument("--sweep-command", choices=["oracle", "learn", "simulate", "bound"],
                    default="simulate", help="command each sweep config runs")
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "sweep":
            with ThreadPoolExecutor(max_workers=args.workers) as pool:
                futures = [pool.submit(_run_one, args.sweep_command, c, args.out, args.seed,
                                       args.gain, args.gain_file) for c in args.config]
                outs = [f.result() for f in futures]
        else:
            if len(args.config) != 1:
                raise ConfigurationError("only sweep accepts several --config")
            outs = [_run_one(args.command, args.config[0], args.out, args.seed,
                             args.gain, args.gain_file)]
    except ResadpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    for o in outs:
        print(o)
    return 0


if __name__ == "__main__":
    sys.exit(main())
