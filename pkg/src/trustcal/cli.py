"""Command-line entry point: ``trustcal {run,compare,synth,baselines}``.

Exit status is 0 on success, 2 for bad flags and 1 for data or schema errors.
Seeds come from ``--seed``, then the ``TRUSTCAL_SEED`` environment variable,
then the config document, then 0.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from trustcal.bandits import Algorithm, Hyperparameters
from trustcal.domain import OpinionEncoding, RewardSpec
from trustcal.exceptions import TrustCalError
from trustcal.ingest import (
    DatasetManifest,
    SyntheticKind,
    SyntheticSpec,
    generate,
    load,
    save,
    tomllib,
)
from trustcal.replay import ReplayConfig, baseline_totals, run_replay
from trustcal.report import FORMATS, render, render_baselines

HYPER_FLAGS = {
    "alpha": float, "theta_update": str, "retrain_period": int, "max_depth": int,
    "min_leaf": int, "epsilon_floor": float, "hidden": int, "lr": float,
}


class CliError(Exception):
    """Bad flag value discovered after parsing (exit status 2)."""


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="delimited data file")
    p.add_argument("--manifest", required=True, help="TOML manifest mapping file columns")
    p.add_argument("--reward", choices=["unit", "signed", "abs100"],
                   help="override the manifest's reward kind")
    p.add_argument("--out", choices=FORMATS, default="table", help="report format")
    p.add_argument("--output", help="write the report here instead of stdout")


def _add_replay_flags(p):
    p.add_argument("--runs", type=int, help="shuffled replay runs (default 100)")
    p.add_argument("--seed", type=int, help="base seed; run k uses seed+k")
    p.add_argument("--config", help="TOML config document (runs, seed, encoding, [hyper])")
    p.add_argument("--encoding", choices=["raw", "onehot"], help="opinion encoding override")
    p.add_argument("--workers", type=int, default=1, help="processes for parallel runs")
    p.add_argument("--figures", metavar="DIR", help="also render PNG figures into DIR")
    p.add_argument("--alpha", type=float, help="LinUCB confidence weight (default 1.0)")
    p.add_argument("--theta-update", choices=["accumulate", "latest"],
                   help="LinUCB coefficient update rule (default accumulate)")
    p.add_argument("--epsilon-floor", type=float, help="floor of max(floor, 1/sqrt(t)) (default 0.01)")
    p.add_argument("--retrain-period", type=int, help="tree refit period in trials (default 50)")
    p.add_argument("--max-depth", type=int, help="tree depth limit (default 6)")
    p.add_argument("--min-leaf", type=int, help="tree minimum leaf size (default 5)")
    p.add_argument("--hidden", type=int, help="ANN hidden width (default 15)")
    p.add_argument("--lr", type=float, help="ANN Adam learning rate (default 0.001)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trustcal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="replay a dataset through one bandit indicator")
    _add_data_flags(p)
    p.add_argument("--algo", required=True, choices=[a.value for a in Algorithm])
    _add_replay_flags(p)

    p = sub.add_parser("compare", help="replay a dataset through all three indicators")
    _add_data_flags(p)
    _add_replay_flags(p)

    p = sub.add_parser("baselines", help="report G, per-opinion g and T without running bandits")
    _add_data_flags(p)

    p = sub.add_parser("synth", help="write a synthetic dataset and its manifest")
    p.add_argument("--kind", required=True, choices=[k.value for k in SyntheticKind])
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--features", type=int, default=3)
    p.add_argument("--seed", type=int)
    p.add_argument("--arms", type=int, default=3, help="arm count (linear only)")
    p.add_argument("--sigma", type=float, default=0.1, help="payoff noise (linear only)")
    p.add_argument("--threshold", type=float, default=0.5, help="expertise split (complementary only)")
    p.add_argument("--off-opinion", choices=["default", "random"], default="default",
                   help="what an agent states outside its expertise (complementary only)")
    p.add_argument("--output", required=True, help="CSV path to write")
    p.add_argument("--manifest-out", help="manifest path (default: OUTPUT with .toml suffix)")
    return parser


def _resolve_seed(flag, config) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("TRUSTCAL_SEED")
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise CliError(f"TRUSTCAL_SEED must be an integer, got {env!r}") from None
    return int(config.get("seed", 0))


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise CliError(f"--config: no such file {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"--config {path}: {exc}") from None


def _hyper(args, config) -> Hyperparameters:
    values = {}
    for key, value in config.get("hyper", {}).items():
        if key not in HYPER_FLAGS:
            raise CliError(f"--config: unknown hyperparameter {key!r}")
        values[key] = HYPER_FLAGS[key](value)
    for key in HYPER_FLAGS:
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag
    hyper = Hyperparameters(**values)
    checks = [
        (hyper.alpha > 0, "--alpha must be positive"),
        (hyper.retrain_period >= 1, "--retrain-period must be >= 1"),
        (hyper.max_depth >= 0, "--max-depth must be >= 0"),
        (hyper.min_leaf >= 1, "--min-leaf must be >= 1"),
        (0 <= hyper.epsilon_floor <= 1, "--epsilon-floor must be in [0, 1]"),
        (hyper.hidden >= 1, "--hidden must be >= 1"),
        (hyper.lr > 0, "--lr must be positive"),
        (hyper.theta_update in ("accumulate", "latest"), "--theta-update must be accumulate or latest"),
    ]
    for ok, message in checks:
        if not ok:
            raise CliError(message)
    return hyper


def _load_data(args):
    manifest = DatasetManifest.read(args.manifest)
    dataset = load(args.data, manifest)
    reward = RewardSpec.parse(args.reward) if args.reward else None
    return dataset, reward


def _emit(text: str, output) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _replay(args, algorithms) -> int:
    config = _read_config(args.config)
    runs = args.runs if args.runs is not None else int(config.get("runs", 100))
    if runs < 1:
        raise CliError("--runs must be >= 1")
    if args.workers < 1:
        raise CliError("--workers must be >= 1")
    seed = _resolve_seed(args.seed, config)
    hyper = _hyper(args, config)
    encoding_name = args.encoding or config.get("encoding")
    encoding = OpinionEncoding.parse(encoding_name) if encoding_name else None
    dataset, reward = _load_data(args)
    summaries = []
    for algo in algorithms:
        cfg = ReplayConfig(algorithm=algo, runs=runs, base_seed=seed, hyper=hyper, reward=reward,
                           encoding=encoding, workers=args.workers,
                           track_curves=bool(args.figures))
        summaries.append(run_replay(dataset, cfg))
    _emit(render(summaries, args.out), args.output)
    if args.figures:
        from trustcal.plotting import write_report_figures

        stem = summaries[0].dataset if len(summaries) > 1 else f"{summaries[0].dataset}_{algorithms[0].value}"
        for path in write_report_figures(summaries, args.figures, stem):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def _synth(args) -> int:
    seed = _resolve_seed(args.seed, {})
    spec = SyntheticSpec(SyntheticKind(args.kind), args.n, args.features, seed, n_arms=args.arms,
                         sigma=args.sigma, threshold=args.threshold, off_opinion=args.off_opinion)
    dataset = generate(spec)
    save(dataset.records, args.output)
    manifest_path = Path(args.manifest_out or Path(args.output).with_suffix(".toml"))
    info = dataset.info
    manifest = DatasetManifest.canonical(info.name, info.arms, info.reward, info.n_features,
                                         info.n_agents, info.encoding, normalize=False)
    manifest = dataclasses.replace(manifest, agent_names=info.agent_names)
    manifest_path.write_text(manifest.to_toml(), encoding="utf-8")
    print(f"wrote {len(dataset)} trials to {args.output} and manifest {manifest_path}", file=sys.stderr)
    return 0


def _baselines(args) -> int:
    dataset, reward = _load_data(args)
    reward = reward or dataset.info.reward
    info = dataclasses.replace(dataset.info, reward=reward)
    _emit(render_baselines(baseline_totals(dataset, reward), info, args.out), args.output)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _replay(args, [Algorithm(args.algo)])
        if args.command == "compare":
            return _replay(args, list(Algorithm))
        if args.command == "synth":
            return _synth(args)
        return _baselines(args)
    except CliError as exc:
        parser.error(str(exc))
    except (TrustCalError, OSError, ValueError) as exc:
        print(f"trustcal: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
