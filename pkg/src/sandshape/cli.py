"""Command line interface: run sessions, benchmark, mine datasets, train,
serve the operator API.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset, learner
from ._kernels import BACKEND
from .scenarios import BUILTIN, get_scenario, save_scenario
from .session import Session, bench, load_log, replay, save_log, write_bench_csv


def _csv_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def cmd_run(args) -> int:
    scenario = get_scenario(args.scenario)
    if args.seed is not None:
        scenario.master_seed = args.seed
    if args.term:
        scenario.termination.mode = args.term
    needs_model = args.strategy == "ann" or (args.choices and "push-ann" in args.choices)
    if needs_model and not args.model:
        print("the ann strategy needs --model", file=sys.stderr)
        return 2
    model = learner.load(args.model) if args.model else None
    sess = Session(scenario, model=model, auto_strategy=args.strategy)

    if args.mode == "auto":
        sess.run_autonomous()
    elif args.choices:
        sess.run_scripted(_csv_list(args.choices))
        if not sess.terminated:
            sess.terminate("operator")
    else:
        choice = "tap" if args.strategy == "tap" else f"push-{args.strategy}"
        sess.run_forced(choice)

    log = sess.to_log()
    print(f"scenario={scenario.name} backend={BACKEND} iterations={len(log.records)} "
          f"e_initial={sess.errors[0]:.4f} e_final={sess.errors[-1]:.4f} reason={sess.reason}")
    if args.out:
        save_log(log, args.out)
        print(f"log written to {args.out}")
    return 0


def cmd_replay(args) -> int:
    log = load_log(args.log)
    model = learner.load(args.model) if args.model else None
    verdict = replay(log, model=model)
    print(verdict)
    return 0 if verdict == "match" else 1


def cmd_bench(args) -> int:
    names = _csv_list(args.scenarios)
    unknown = [n for n in names if n not in BUILTIN and not Path(n).exists()]
    if unknown:
        print(f"unknown scenarios: {unknown}", file=sys.stderr)
        return 2
    factories = {n: (BUILTIN[n] if n in BUILTIN else (lambda p=n: get_scenario(p))) for n in names}
    strategies = _csv_list(args.strategies)
    if "ann" in strategies and not args.model:
        print("the ann strategy needs --model", file=sys.stderr)
        return 2
    model = learner.load(args.model) if args.model else None
    report = bench(factories, strategies, [int(s) for s in _csv_list(args.seeds)], model=model)
    for row in report.summary_rows():
        print(f"{row['scenario']:<14} {row['strategy']:<5} seed={row['seed']:<4} "
              f"e: {row['initial_e']:.4f} -> {row['final_e']:.4f} "
              f"iters={row['iterations']} reason={row['reason']}")
    if args.csv:
        write_bench_csv(report, args.csv)
        print(f"curves written to {args.csv}")
    return 0


def cmd_dataset(args) -> int:
    if args.dataset_cmd == "synth":
        rng = np.random.default_rng(args.seed)
        demos = dataset.synthesize_demos(args.count, rng, width=args.width, height=args.height)
        root = Path(args.out)
        for demo in demos:
            dataset.save_demo(demo, root)
        print(f"wrote {len(demos)} demos under {root}")
        return 0
    # extract
    root = Path(args.demos)
    folders = sorted(p for p in root.iterdir() if p.is_dir())
    demos = [dataset.load_demo(p) for p in folders]
    triplets = dataset.mine_demos(demos, tau_u=args.tau_u, tau_x=args.tau_x)
    dataset.save_triplets(triplets, args.out)
    print(f"extracted {len(triplets)} triplets from {len(demos)} demos -> {args.out}")
    if triplets and args.stats_out:
        dataset.save_stats(dataset.compute_stats(triplets), args.stats_out)
        print(f"stats written to {args.stats_out}")
    return 0


def cmd_train(args) -> int:
    triplets = dataset.load_triplets(args.data)
    config = learner.TrainConfig(episodes=args.episodes, seed=args.seed,
                                 learning_rate=args.learning_rate, batch_size=args.batch_size)
    model, report = learner.train(triplets, config)
    learner.save(model, args.model)
    print(f"trained on {len(triplets)} triplets, loss {report.loss_first:.5f} -> {report.loss_final:.5f}")
    print("test MAE (px): " + "  ".join(f"{k}={v:.2f}" for k, v in report.mae.items()))
    if args.report:
        Path(args.report).write_text(json.dumps({
            "n_triplets": len(triplets),
            "episodes": config.episodes,
            "seed": config.seed,
            "loss": "mean squared error on [0,1]-scaled pixel outputs",
            "mae_px": report.mae,
            "loss_first": report.loss_first,
            "loss_final": report.loss_final,
            "loss_curve": report.loss_curve,
        }, indent=2) + "\n")
        print(f"report written to {args.report}")
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    print(f"serving operator API on {args.host}:{args.port} (backend={BACKEND})")
    serve(host=args.host, port=args.port, static_dir=args.ui)
    return 0


def cmd_scenario(args) -> int:
    if args.scenario_cmd == "list":
        for name in sorted(BUILTIN):
            print(name)
        return 0
    sc = get_scenario(args.name)
    save_scenario(sc, args.out)
    print(f"scenario {sc.name} written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sandshape", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run one shape-servoing session")
    p.add_argument("--scenario", required=True, help="built-in name or scenario file")
    p.add_argument("--mode", choices=["auto", "operator"], default="auto")
    p.add_argument("--strategy", choices=["max", "avg", "ann", "tap"], default="max")
    p.add_argument("--choices", help="comma list of per-iteration choices (operator mode)")
    p.add_argument("--term", choices=["strict", "relaxed"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--model", help="model file for the ann strategy")
    p.add_argument("--out", help="write the session log here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="re-execute a session log and verify it")
    p.add_argument("--log", required=True)
    p.add_argument("--model", help="model file if the log used the ann strategy")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("bench", help="error curves over scenarios x strategies x seeds")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--strategies", default="max,avg,ann")
    p.add_argument("--seeds", default="7")
    p.add_argument("--model", help="model file for the ann strategy")
    p.add_argument("--csv", help="write per-iteration curves here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dataset", help="synthesize demos / extract triplets")
    dsub = p.add_subparsers(dest="dataset_cmd", required=True)
    ps = dsub.add_parser("synth")
    ps.add_argument("--out", required=True, help="demo directory")
    ps.add_argument("--count", type=int, default=20)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--width", type=int, default=640)
    ps.add_argument("--height", type=int, default=480)
    ps.set_defaults(func=cmd_dataset)
    pe = dsub.add_parser("extract")
    pe.add_argument("--demos", required=True, help="demo directory")
    pe.add_argument("--out", required=True, help="triplet record file")
    pe.add_argument("--tau-u", type=float, default=5.0)
    pe.add_argument("--tau-x", type=float, default=3.0)
    pe.add_argument("--stats-out", help="write dataset statistics here")
    pe.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train the pushing network")
    p.add_argument("--data", required=True, help="triplet record file")
    p.add_argument("--episodes", type=int, default=25_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--report", help="write the training report here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="start the operator HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--ui", help="serve this directory of static console files at /ui")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("scenario", help="inspect built-in scenarios")
    ssub = p.add_subparsers(dest="scenario_cmd", required=True)
    ssub.add_parser("list").set_defaults(func=cmd_scenario)
    pd = ssub.add_parser("dump")
    pd.add_argument("name")
    pd.add_argument("--out", required=True)
    pd.set_defaults(func=cmd_scenario)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
