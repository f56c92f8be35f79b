"""Engine defaults and their JSON config-file form."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .predictor import FineTuneConfig, TrainConfig


@dataclass(frozen=True)
class EngineConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    fine_tune: FineTuneConfig = field(default_factory=FineTuneConfig)
    horizons: int = 2
    roll_steps: int = 50
    roll_learning_rate: float = 0.02
    cutoff_threshold: float = 0.1
    binning: str = "year"
    keywords_top_k: int = 10
    page_size_documents: int = 4
    max_page_size_documents: int = 8
    level1_cell_budget: int = 262144
    aggregator: str = "max"

    def __post_init__(self) -> None:
        if self.horizons < 1:
            raise ValueError("horizons must be >= 1")
        if not (0.0 <= self.cutoff_threshold <= 1.0):
            raise ValueError("cutoff threshold must lie in [0, 1]")
        if not (1 <= self.page_size_documents <= self.max_page_size_documents):
            raise ValueError("document page size outside its budget")

    def roll_config(self) -> FineTuneConfig:
        return FineTuneConfig(
            steps=self.roll_steps,
            learning_rate=self.roll_learning_rate,
            feedback_weight=self.fine_tune.feedback_weight,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "EngineConfig":
        doc = dict(doc)
        train = TrainConfig(**doc.pop("train", {}))
        fine = FineTuneConfig(**doc.pop("fine_tune", {}))
        return cls(train=train, fine_tune=fine, **doc)

    @classmethod
    def load(cls, path: str | Path) -> "EngineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def with_seed(self, seed: int) -> "EngineConfig":
        return replace(self, train=replace(self.train, seed=seed))
