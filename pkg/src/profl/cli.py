"""Command-line front end for the experiment driver."""

from __future__ import annotations

import argparse
import sys

from .experiment import ATTACKS, DATASETS, MODES, ExperimentConfig, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="profl-experiment",
        description="Run a paired defended/undefended federated-learning experiment.",
    )
    parser.add_argument("--config", help="flat key = value config file; flags override it")
    parser.add_argument("--dataset", choices=DATASETS)
    parser.add_argument("--attack", choices=ATTACKS)
    parser.add_argument("--stealth", action="store_true", default=None,
                        help="spike a few coordinates of each malicious gradient")
    parser.add_argument("--ratio", type=float, help="malicious fraction in percent (0..50)")
    parser.add_argument("--users", type=int)
    parser.add_argument("--rounds", type=int)
    parser.add_argument("--repeats", type=int)
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--modulus-bits", type=int, dest="modulus_bits")
    parser.add_argument("--allow-insecure", action="store_true", default=None,
                        dest="allow_insecure", help="permit sub-1024-bit test moduli")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    return parser


def config_from_args(argv: list[str] | None = None) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key != "config" and value is not None
    }
    if "ratio" in overrides:
        overrides["ratio"] = overrides["ratio"] / 100.0
    for key, value in overrides.items():
        setattr(config, key, value)
    config.validate()
    return config


def main(argv: list[str] | None = None) -> int:
    config = config_from_args(argv)
    result = run_experiment(config)
    summary = result.summary()
    print(f"outputs written to {result.out_dir}")
    print(
        "final mean: acc={acc:.3f} (baseline {acc_baseline:.3f}, AI {ai:+.3f}), "
        "source acc={acc_source:.3f} (baseline {acc_source_baseline:.3f}, "
        "AI {ai_source:+.3f})".format(**summary)
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
