"""Command line: train, train-sources, eval, plot.

Failures exit nonzero after printing a single line to stderr of the form
``error: <kind>: <message>``.
"""
from __future__ import annotations

import argparse
import sys
import warnings

from ..envs import load_env_spec
from ..transfer import TransferSchedule
from .config import load_config
from .curves import DEFAULT_WINDOW, emit_curves
from .policyfile import load_policy
from .runner import evaluate_policy, run_training, train_source_policies

EXIT_USAGE = 2
EXIT_FAILURE = 1


class CliError(Exception):
    def __init__(self, kind, message, code=EXIT_FAILURE):
        super().__init__(message)
        self.kind = kind
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message, EXIT_USAGE)


def _transfer(text):
    try:
        TransferSchedule.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def build_parser():
    p = _Parser(prog="ptflab", description="Policy transfer experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a target-task learner")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--deterministic", action="store_true")
    t.add_argument("--transfer", type=_transfer, help="off | fixed:<w> | adaptive")
    t.add_argument("--episodes", type=int)
    t.add_argument("--out", required=True)

    s = sub.add_parser("train-sources", help="train the source policies of a config")
    s.add_argument("--config", required=True)
    s.add_argument("--imperfect", type=float, metavar="RATE",
                   help="stop each source once its success rate reaches RATE")
    s.add_argument("--transfer", type=_transfer, help=argparse.SUPPRESS)
    s.add_argument("--out", required=True)

    e = sub.add_parser("eval", help="greedy evaluation of a policy file")
    e.add_argument("--policy", required=True)
    e.add_argument("--env", required=True)
    e.add_argument("--episodes", type=int, required=True)
    e.add_argument("--gamma", type=float, default=0.99)
    e.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("plot", help="aggregate metrics files into curves")
    g.add_argument("--in", dest="in_dir", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    return p


def _train(args):
    config = load_config(args.config)
    config = config.with_overrides(transfer=args.transfer, episodes=args.episodes,
                                   deterministic=True if args.deterministic else None)
    seeds = [args.seed] if args.seed is not None else None
    for res in run_training(config, args.out, seeds):
        last = res.records[-1] if res.records else None
        print(f"seed={res.seed} episodes={len(res.records)} "
              f"final_return={last.discounted_return if last else float('nan'):.6g} "
              f"metrics={res.metrics_path} policy={res.policy_path}")


def _train_sources(args):
    config = load_config(args.config)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        results = train_source_policies(config, args.out, args.imperfect)
    for res in results:
        print(f"source={res.path} episodes={res.episodes} score={res.score:.6g} "
              f"status={res.status}")
    for w in caught:
        print(f"warning: below-threshold: {w.message}", file=sys.stderr)


def _eval(args):
    if args.episodes < 1:
        raise CliError("contract", "--episodes must be at least 1")
    policy = load_policy(args.policy)
    spec = load_env_spec(args.env)
    mean, std, _ = evaluate_policy(policy, spec, args.episodes, args.gamma, args.seed)
    print(f"mean={mean!r} std={std!r} episodes={args.episodes}")


def _plot(args):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        csv_path, plot_path, curves = emit_curves(args.in_dir, args.out, args.window)
    for w in caught:
        print(f"warning: truncated: {w.message}", file=sys.stderr)
    print(f"csv={csv_path} plot={plot_path} seeds={len(curves.seeds)} "
          f"episodes={curves.episodes} switch_slope={curves.switch_slope!r}")


COMMANDS = {"train": _train, "train-sources": _train_sources, "eval": _eval, "plot": _plot}


def _one_line(text):
    return " ".join(str(text).split())


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc.kind}: {_one_line(exc)}", file=sys.stderr)
        return exc.code
    except (ValueError, OSError, RuntimeError) as exc:
        kind = type(exc).__name__
        print(f"error: {kind}: {_one_line(exc)}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as exc:  # anything else is a bug, but keep the one-line contract
        print(f"error: internal: {type(exc).__name__}: {_one_line(exc)}", file=sys.stderr)
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
