"""Command-line front end: closed-loop runs, log replay, self checks.

    navsim run [--config FILE] --out DIR [--seed N] [--logs]
    navsim replay --log FILE --truth FILE [--config FILE] --out DIR
                  [--vectors FILE] [--inputs FILE]
    navsim verify

`run` writes run.csv and summary.txt into --out; with --logs it also
writes the four replay logs (landmarks, vectors, truth, inputs).
`replay` scores the observer alone over a recorded log. Without
--config both commands use the built-in default scenario.
"""

from __future__ import annotations

import argparse
import sys

from .config import build_config, load_config
from .harness import emit, emit_replay_logs, run_closed_loop, run_replay


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="navsim",
        description="Landmark-driven pose observer and tracking "
                    "controller simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate the closed loop")
    run_p.add_argument("--config", help="config file (key = value lines)")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the config's seed")
    run_p.add_argument("--logs", action="store_true",
                       help="also write replay logs")

    rep_p = sub.add_parser("replay", help="re-run the observer on a log")
    rep_p.add_argument("--log", required=True,
                       help="landmark measurement log")
    rep_p.add_argument("--truth", required=True, help="ground-truth log")
    rep_p.add_argument("--config", help="config file (key = value lines)")
    rep_p.add_argument("--out", required=True, help="output directory")
    rep_p.add_argument("--vectors", help="vector measurement log")
    rep_p.add_argument("--inputs", help="applied-inputs log")

    sub.add_parser("verify", help="run the built-in self checks")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "verify":
        from .verify import run_all

        return 0 if run_all() else 1

    if args.config is not None:
        cfg = load_config(args.config, seed=getattr(args, "seed", None))
    else:
        cfg = build_config(seed=getattr(args, "seed", None))

    if args.command == "run":
        record = run_closed_loop(cfg, keep_measurements=args.logs)
        paths = emit(record, args.out)
        if args.logs:
            paths.update(emit_replay_logs(record, cfg, args.out))
    else:
        record = run_replay(args.log, args.truth, cfg,
                            vectors_log=args.vectors,
                            inputs_log=args.inputs)
        paths = emit(record, args.out)

    for name in sorted(paths):
        print(f"{name}: {paths[name]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
