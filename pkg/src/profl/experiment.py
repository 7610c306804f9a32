"""Experiment driver: paired defended/undefended runs, metrics, plots.

Every experiment executes the defended pipeline and an undefended
federated-averaging baseline with identical seeds, shards and attack
realizations, so the per-round accuracy-improvement columns compare like
with like.  Results land in the output directory as ``metrics.csv``
(per-round), ``summary.csv`` (final row per repetition plus the mean),
``ledger.csv`` (per-round communication, encrypted runs), an
``aggregation.csv`` report (survivors and outlier rejections) and PNG
trajectory plots.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import encoding, paillier
from .attacks import AttackConfig
from .datasets import Dataset, load_mnist, synthetic_blobs
from .simulation import (
    DEFENSE_FULL,
    DEFENSE_NONE,
    FederatedSimulation,
    MODE_ENCRYPTED,
    MODE_PLAIN,
    RoundMetrics,
)

DATASETS = ("mnist", "fashion", "synthetic")
ATTACKS = ("none", "targeted", "untargeted")
MODES = (MODE_PLAIN, MODE_ENCRYPTED)


@dataclass
class ExperimentConfig:
    dataset: str = "synthetic"
    data_dir: str = "data"
    users: int = 20
    ratio: float = 0.0  # fraction of malicious users, 0..0.5
    attack: str = "none"
    stealth: bool = False
    rounds: int = 200
    repeats: int = 3
    mode: str = MODE_PLAIN
    modulus_bits: int = paillier.DEFAULT_MODULUS_BITS
    allow_insecure: bool = False
    deg: int = encoding.DEFAULT_DEG
    clip: float = encoding.DEFAULT_CLIP
    lr: float = 0.05
    momentum: float = 0.5
    batch_size: int = 256
    local_steps: int = 1
    source: int = 0
    target: int = 6
    beta: float = 5.0
    spike_count: int = 10
    seed: int = 0
    out: str = "results"
    dump_gradients: bool = False  # write per-round decoded aggregates (wide CSV)
    # synthetic dataset shape
    synth_train: int = 6000
    synth_test: int = 1000
    synth_features: int = 784
    synth_classes: int = 10

    def validate(self) -> None:
        if self.dataset not in DATASETS:
            raise ValueError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.attack not in ATTACKS:
            raise ValueError(f"attack must be one of {ATTACKS}, got {self.attack!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 <= self.ratio <= 0.5:
            raise ValueError("ratio must lie in [0, 0.5]")
        if self.users < 2:
            raise ValueError("need at least two users")
        if self.rounds < 1 or self.repeats < 1:
            raise ValueError("rounds and repeats must be positive")

    def attack_config(self) -> AttackConfig:
        return AttackConfig(
            kind=self.attack,
            ratio=self.ratio if self.attack != "none" else 0.0,
            stealth=self.stealth,
            source=self.source,
            target=self.target,
            beta=self.beta,
            spike_count=self.spike_count,
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        """Parse a flat key = value config file (# starts a comment)."""
        values = {}
        types = {f.name: f.type for f in fields(cls)}
        for raw_line in Path(path).read_text().splitlines():
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {raw_line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = _coerce(value, types[key])
        return cls(**values)

    def to_file(self, path: str | Path) -> None:
        lines = [f"{key} = {value}" for key, value in asdict(self).items()]
        Path(path).write_text("\n".join(lines) + "\n")


def _coerce(value: str, type_name: str):
    if type_name == "int":
        return int(value)
    if type_name == "float":
        return float(value)
    if type_name == "bool":
        if value.lower() in ("true", "1", "yes", "on"):
            return True
        if value.lower() in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    return value


@dataclass
class RepetitionResult:
    defended: list[RoundMetrics]
    baseline: list[RoundMetrics]
    sim: FederatedSimulation
    baseline_sim: FederatedSimulation


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    repetitions: list[RepetitionResult] = field(default_factory=list)
    out_dir: Path | None = None

    def final_rows(self) -> list[dict]:
        rows = []
        for rep, result in enumerate(self.repetitions):
            d, b = result.defended[-1], result.baseline[-1]
            rows.append(
                {
                    "repetition": rep,
                    "acc": d.acc,
                    "acc_source": d.acc_source,
                    "acc_baseline": b.acc,
                    "acc_source_baseline": b.acc_source,
                    "ai": d.acc - b.acc,
                    "ai_source": d.acc_source - b.acc_source,
                }
            )
        return rows

    def summary(self) -> dict:
        rows = self.final_rows()
        return {
            key: float(np.mean([row[key] for row in rows]))
            for key in rows[0]
            if key != "repetition"
        }


def load_dataset(config: ExperimentConfig, seed: int) -> Dataset:
    if config.dataset == "synthetic":
        return synthetic_blobs(
            seed,
            n_train=config.synth_train,
            n_test=config.synth_test,
            features=config.synth_features,
            classes=config.synth_classes,
        )
    # mnist and fashion share the IDX layout; the directory picks the files
    subdir = Path(config.data_dir) / config.dataset
    root = subdir if subdir.exists() else Path(config.data_dir)
    return load_mnist(root, train_limit=config.synth_train, test_limit=config.synth_test)


def _build_sim(
    config: ExperimentConfig, dataset: Dataset, seed: int, defense: str
) -> FederatedSimulation:
    return FederatedSimulation(
        dataset=dataset,
        n_users=config.users,
        seed=seed,
        attack=config.attack_config(),
        defense=defense,
        # the undefended baseline never needs the crypto path; mode
        # equivalence makes the plain run representative
        mode=config.mode if defense == DEFENSE_FULL else MODE_PLAIN,
        lr=config.lr,
        momentum=config.momentum,
        batch_size=config.batch_size,
        local_steps=config.local_steps,
        deg=config.deg,
        clip=config.clip,
        modulus_bits=config.modulus_bits,
        allow_insecure=config.allow_insecure,
    )


def run_repetition(config: ExperimentConfig, seed: int) -> RepetitionResult:
    dataset = load_dataset(config, seed)
    defended_sim = _build_sim(config, dataset, seed, DEFENSE_FULL)
    baseline_sim = _build_sim(config, dataset, seed, DEFENSE_NONE)
    defended = defended_sim.run(config.rounds)
    baseline = baseline_sim.run(config.rounds)
    for d, b in zip(defended, baseline):
        d.ai = d.acc - b.acc
        d.ai_source = d.acc_source - b.acc_source
    return RepetitionResult(defended, baseline, defended_sim, baseline_sim)


def run_experiment(config: ExperimentConfig, write_outputs: bool = True) -> ExperimentResult:
    config.validate()
    result = ExperimentResult(config=config)
    for rep in range(config.repeats):
        result.repetitions.append(run_repetition(config, config.seed + rep))
    if write_outputs:
        out_dir = Path(config.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        result.out_dir = out_dir
        config.to_file(out_dir / "config.txt")
        write_metrics_csv(result, out_dir / "metrics.csv")
        write_summary_csv(result, out_dir / "summary.csv")
        write_ledger_csv(result, out_dir / "ledger.csv")
        write_aggregation_csv(result, out_dir / "aggregation.csv")
        if config.dump_gradients:
            write_gradients_csv(result, out_dir / "gradients.csv")
        emit_plots(result, out_dir)
    return result


def write_metrics_csv(result: ExperimentResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "repetition",
                "round",
                "acc",
                "acc_source",
                "acc_baseline",
                "acc_source_baseline",
                "ai",
                "ai_source",
                "bytes",
            ]
        )
        for rep, repetition in enumerate(result.repetitions):
            for d, b in zip(repetition.defended, repetition.baseline):
                writer.writerow(
                    [
                        rep,
                        d.round_index,
                        f"{d.acc:.6f}",
                        f"{d.acc_source:.6f}",
                        f"{b.acc:.6f}",
                        f"{b.acc_source:.6f}",
                        f"{d.ai:.6f}",
                        f"{d.ai_source:.6f}",
                        d.payload_bytes,
                    ]
                )


def write_summary_csv(result: ExperimentResult, path: Path) -> None:
    config = result.config
    rows = result.final_rows()
    mean_row = result.summary()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "dataset",
                "attack",
                "stealth",
                "ratio",
                "repetition",
                "acc_source_baseline",
                "acc_baseline",
                "acc_source",
                "acc",
                "ai_source",
                "ai",
            ]
        )
        for row in rows + [{**mean_row, "repetition": "mean"}]:
            writer.writerow(
                [
                    config.dataset,
                    config.attack,
                    config.stealth,
                    f"{config.ratio:.2f}",
                    row["repetition"],
                    f"{row['acc_source_baseline']:.6f}",
                    f"{row['acc_baseline']:.6f}",
                    f"{row['acc_source']:.6f}",
                    f"{row['acc']:.6f}",
                    f"{row['ai_source']:.6f}",
                    f"{row['ai']:.6f}",
                ]
            )


def write_ledger_csv(result: ExperimentResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("repetition,round,link,phase,bytes\n")
        for rep, repetition in enumerate(result.repetitions):
            fabric = repetition.sim.fabric
            if fabric is None:
                continue
            for row in fabric.ledger.round_rows:
                fh.write(f"{rep}," + ",".join(str(x) for x in row) + "\n")


def write_aggregation_csv(result: ExperimentResult, path: Path) -> None:
    """Survivor sets and sparse per-dimension rejection counts per round."""
    with open(path, "w", newline="") as fh:
        fh.write("repetition,round,survivors,rejections\n")
        for rep, repetition in enumerate(result.repetitions):
            for round_index, report in enumerate(repetition.sim.aggregation_reports):
                survivors = "|".join(str(s) for s in report.survivors)
                nonzero = np.nonzero(report.rejections)[0]
                rejections = ";".join(f"{d}:{report.rejections[d]}" for d in nonzero)
                fh.write(f"{rep},{round_index},{survivors},{rejections}\n")


def _mean_curve(runs: list[list[RoundMetrics]], picker) -> np.ndarray:
    return np.mean([[picker(m) for m in metrics] for metrics in runs], axis=0)


def write_gradients_csv(result: ExperimentResult, path: Path) -> None:
    """Decoded aggregated gradient per round, one wide row per round."""
    deg = result.config.deg
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        dims = result.repetitions[0].sim.model.dims
        writer.writerow(["repetition", "round"] + [f"dim_{d}" for d in range(dims)])
        for rep, repetition in enumerate(result.repetitions):
            for round_index, encoded in enumerate(repetition.sim.aggregates):
                writer.writerow(
                    [rep, round_index] + [f"{v / deg:.10g}" for v in encoded]
                )


def emit_plots(result: ExperimentResult, out_dir: Path) -> list[Path]:
    """Accuracy-trajectory plots (mean over repetitions), defended vs baseline."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not result.repetitions or not result.repetitions[0].defended:
        raise ValueError("nothing to plot: experiment produced no metrics")
    config = result.config
    rounds = [m.round_index for m in result.repetitions[0].defended]
    defended_runs = [rep.defended for rep in result.repetitions]
    baseline_runs = [rep.baseline for rep in result.repetitions]

    targets = [("acc", "Test accuracy", lambda m: m.acc)]
    if config.attack == "targeted":
        targets.append(("acc_source", f"Class-{config.source} accuracy", lambda m: m.acc_source))

    paths = []
    for name, label, picker in targets:
        fig, ax = plt.subplots(figsize=(6, 4))
        marker = "o" if len(rounds) == 1 else None
        ax.plot(rounds, _mean_curve(defended_runs, picker), label="defended", marker=marker)
        ax.plot(
            rounds, _mean_curve(baseline_runs, picker), label="undefended baseline", marker=marker
        )
        ax.set_xlabel("round")
        ax.set_ylabel(label)
        ax.set_ylim(0.0, 1.0)
        title = f"{config.dataset}, {config.attack}"
        if config.attack != "none":
            title += f" @ {config.ratio:.0%}" + (" +stealth" if config.stealth else "")
        ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"{name}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths
