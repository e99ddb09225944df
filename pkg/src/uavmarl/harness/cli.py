"""``uavmarl`` command line: run, plot-rewards, plot-trajectory, summarize, ne-probe, grad-check."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from uavmarl.errors import ConfigError, DomainError, UsageError
from uavmarl.harness.experiment import (
    ExperimentSpec,
    emit_reward_plot,
    emit_trajectory_plot,
    load_run_config,
    output_root,
    resolve_scenario,
    run_experiment,
    run_single,
    summarize_final_rewards,
)
from uavmarl.harness.gradchecks import LAYERS, check_layer
from uavmarl.trainer.config import VARIANTS, TrainerConfig
from uavmarl.trainer.envs import CommEnvAdapter
from uavmarl.trainer.loop import Trainer, ne_deviation_probe


def _cmd_run(args) -> int:
    scenario, snap_trainer = resolve_scenario(args.preset, args.config)
    base = snap_trainer or TrainerConfig()
    out = output_root(args.out)
    if snap_trainer is not None and not args.variant and not args.seeds and args.iters is None:
        # replay a snapshot exactly as recorded
        art = run_single(scenario, snap_trainer, out, args.probe_budget, args.window, args.last_k)
        print(f"wrote {art.metrics}")
        return 0
    spec = ExperimentSpec(
        scenario=scenario,
        variants=args.variant or [base.variant],
        seeds=args.seeds if args.seeds else [base.seed],
        iterations=args.iters if args.iters is not None else base.iterations,
        out_dir=out,
        trainer=base,
        probe_budget=args.probe_budget,
        window=args.window,
        last_k=args.last_k,
    )
    arts = run_experiment(spec)
    for a in arts:
        print(f"wrote {a.metrics}")
    print(f"summary: {out / 'summary.csv'}")
    return 0


def _cmd_plot_rewards(args) -> int:
    out = Path(args.out) if args.out else output_root() / "rewards.svg"
    print(emit_reward_plot(args.metrics, out, args.window))
    return 0


def _cmd_plot_trajectory(args) -> int:
    out = Path(args.out) if args.out else output_root() / "trajectory.svg"
    print(emit_trajectory_plot(args.trajectory, out, args.last_k))
    return 0


def _cmd_summarize(args) -> int:
    out = Path(args.out) if args.out else output_root() / "summary.csv"
    path = summarize_final_rewards(args.metrics, out)
    sys.stdout.write(path.read_text())
    return 0


def _cmd_ne_probe(args) -> int:
    if not args.config:
        raise UsageError("ne-probe needs --config pointing at a run snapshot")
    scenario, tcfg = load_run_config(args.config)
    if tcfg is None:
        raise ConfigError("ne-probe needs a run snapshot with a trainer section")
    tr = Trainer(CommEnvAdapter(scenario), tcfg)
    ckpt = Path(args.checkpoint) if args.checkpoint else Path(args.config).parent / "checkpoints" / "final.npz"
    tr.load(ckpt)
    agents = [args.agent] if args.agent is not None else range(scenario.num_uavs)
    print("agent,budget,improvement,original,best")
    for m in agents:
        r = ne_deviation_probe(tr, m, args.budget)
        print(f"{m},{args.budget},{r.improvement!r},{r.original!r},{r.best!r}")
    return 0


def _cmd_grad_check(args) -> int:
    worst = 0.0
    for name in LAYERS:
        err = max(check_layer(name, s, args.tolerance).max_rel_error for s in range(args.num_seeds))
        worst = max(worst, err)
        status = "PASS" if err <= args.tolerance else "FAIL"
        print(f"{name}: max relative error {err:.3e} over {args.num_seeds} seeds [{status}]")
    return 0 if worst <= args.tolerance else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavmarl", description="Multi-UAV downlink MARL experiments")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train variants over seeds and write run artifacts")
    r.add_argument("--preset", default=None, help="scenario preset (2x4, 2x8, 3x9, 4x16)")
    r.add_argument("--config", default=None, help="scenario document or run snapshot (JSON)")
    r.add_argument("--variant", action="append", choices=VARIANTS, help="repeatable")
    r.add_argument("--seeds", type=int, nargs="+", default=None)
    r.add_argument("--iters", type=int, default=None)
    r.add_argument("--out", default=None)
    r.add_argument("--probe-budget", type=int, default=0, help="iterations per deviation probe (0 skips)")
    r.add_argument("--window", type=int, default=10)
    r.add_argument("--last-k", type=int, default=25)
    r.set_defaults(func=_cmd_run)

    pr = sub.add_parser("plot-rewards", help="reward curves from metrics files")
    pr.add_argument("metrics", nargs="+")
    pr.add_argument("--window", type=int, default=10)
    pr.add_argument("--out", default=None)
    pr.set_defaults(func=_cmd_plot_rewards)

    pt = sub.add_parser("plot-trajectory", help="top-down view of a trajectory file")
    pt.add_argument("trajectory")
    pt.add_argument("--last-k", type=int, default=25)
    pt.add_argument("--out", default=None)
    pt.set_defaults(func=_cmd_plot_trajectory)

    s = sub.add_parser("summarize", help="median final rewards per variant")
    s.add_argument("metrics", nargs="+")
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_summarize)

    n = sub.add_parser("ne-probe", help="unilateral deviation probe on a trained run")
    n.add_argument("--config", default=None, help="run snapshot (config.json)")
    n.add_argument("--checkpoint", default=None)
    n.add_argument("--agent", type=int, default=None)
    n.add_argument("--budget", type=int, default=20)
    n.set_defaults(func=_cmd_ne_probe)

    g = sub.add_parser("grad-check", help="finite-difference checks of the network layers")
    g.add_argument("--num-seeds", type=int, default=10)
    g.add_argument("--tolerance", type=float, default=1e-4)
    g.set_defaults(func=_cmd_grad_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError, UsageError, FileNotFoundError, IndexError) as exc:
        print(f"uavmarl: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
