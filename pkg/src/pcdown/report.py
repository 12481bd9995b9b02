"""Run reports: training curves plus named result metrics, with a text+CSV
on-disk form whose load(save(r)) == r (floats serialized via repr)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .config import RunConfig, config_from_text, config_to_text

__all__ = ["EpochRow", "RunReport"]

EPOCH_COLUMNS = ("epoch", "loss", "task_loss", "subset_loss", "tau", "lr", "sparsity")


@dataclass(frozen=True)
class EpochRow:
    epoch: int
    loss: float
    task_loss: float
    subset_loss: float
    tau: float
    lr: float
    sparsity: float


@dataclass
class RunReport:
    config: RunConfig
    epochs: list[EpochRow] = field(default_factory=list)
    metrics: dict[str, float] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    diagnostics: dict[str, float] = field(default_factory=dict)

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sections = ["[config]", config_to_text(self.config).rstrip("\n")]
        for title, mapping in (
            ("metrics", self.metrics),
            ("timings", self.timings),
            ("diagnostics", self.diagnostics),
        ):
            sections.append(f"[{title}]")
            for key in sorted(mapping):
                sections.append(f"{key}={float(mapping[key])!r}")
        (out / "report.txt").write_text("\n".join(sections) + "\n")
        with (out / "epochs.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(EPOCH_COLUMNS)
            for row in self.epochs:
                writer.writerow(
                    [row.epoch] + [repr(float(getattr(row, c))) for c in EPOCH_COLUMNS[1:]]
                )

    @staticmethod
    def load(out_dir) -> "RunReport":
        out = Path(out_dir)
        text = (out / "report.txt").read_text()
        section = None
        config_lines: list[str] = []
        maps: dict[str, dict[str, float]] = {"metrics": {}, "timings": {}, "diagnostics": {}}
        for line in text.splitlines():
            if not line.strip():
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1]
                continue
            if section == "config":
                config_lines.append(line)
            elif section in maps:
                # split on the last '=': keys like "m=8/generated/accuracy"
                # contain '=' themselves, float reprs never do
                key, _, value = line.rpartition("=")
                maps[section][key] = float(value)
        report = RunReport(
            config=config_from_text("\n".join(config_lines)),
            metrics=maps["metrics"],
            timings=maps["timings"],
            diagnostics=maps["diagnostics"],
        )
        epochs_path = out / "epochs.csv"
        if epochs_path.exists():
            with epochs_path.open() as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header is not None and tuple(header) != EPOCH_COLUMNS:
                    raise ValueError(f"{epochs_path}: unexpected columns {header}")
                for row in reader:
                    report.epochs.append(
                        EpochRow(
                            epoch=int(row[0]),
                            loss=float(row[1]),
                            task_loss=float(row[2]),
                            subset_loss=float(row[3]),
                            tau=float(row[4]),
                            lr=float(row[5]),
                            sparsity=float(row[6]),
                        )
                    )
        return report
