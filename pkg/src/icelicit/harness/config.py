"""Experiment configuration: JSON file plus command-line overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

MECHANISMS = ("mpl-seq", "mpl-bin", "cover", "belief", "naive")
AGENTS = ("truthful", "misreport", "strategic")


class ConfigError(ValueError):
    """Malformed or out-of-range configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    mechanism: str = "belief"
    n: int = 3
    eps: float = 0.05
    delta: float = 0.1
    tau: float = 0.01
    nu: float = 0.1
    T: int | None = None  # None: use the learning budget rule
    budget_c: float = 4.0
    # MPL: lottery (low, high, p_high) and CRRA agents
    lottery: list = field(default_factory=lambda: [0.05, 0.95, 0.5])
    grid: int = 20
    schedule: str = "default"  # default | uniform | geometric:<ratio>
    # cover search: square:<k> | rect:<kx>x<ky> | circle:<k>
    cover: str = "square:3"
    ground_truth: list | None = None
    agent: str = "truthful"
    type: list | None = None  # fixed true type; None draws one per trial
    misreport: list | None = None
    trials: int = 100
    seed: int = 0
    record_timing: bool = False

    def validate(self) -> "ExperimentConfig":
        def bad(name, why):
            raise ConfigError(f"field '{name}': {why}")

        if self.mechanism not in MECHANISMS:
            bad("mechanism", f"must be one of {', '.join(MECHANISMS)}")
        if self.agent not in AGENTS:
            bad("agent", f"must be one of {', '.join(AGENTS)}")
        if not isinstance(self.n, int) or self.n < 2:
            bad("n", "must be an integer >= 2")
        for name in ("eps", "delta", "tau", "nu"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not 0 < v < 1:
                bad(name, "must lie in (0, 1)")
        if self.T is not None and (not isinstance(self.T, int) or self.T < 0):
            bad("T", "must be a non-negative integer or null")
        if not self.budget_c > 0:
            bad("budget_c", "must be positive")
        if len(self.lottery) != 3 or not 0 < self.lottery[0] < self.lottery[1] or not 0 < self.lottery[2] < 1:
            bad("lottery", "must be [low, high, p_high] with 0 < low < high and 0 < p_high < 1")
        if not isinstance(self.grid, int) or self.grid < 2:
            bad("grid", "must be an integer >= 2")
        if not (self.schedule in ("default", "uniform") or self.schedule.startswith("geometric:")):
            bad("schedule", "must be default, uniform or geometric:<ratio>")
        if not isinstance(self.trials, int) or self.trials < 1:
            bad("trials", "must be a positive integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            bad("seed", "must be a non-negative integer")
        if self.ground_truth is not None and len(self.ground_truth) != self.n:
            bad("ground_truth", f"must have n={self.n} entries")
        if self.agent == "misreport" and self.misreport is None:
            bad("misreport", "required when agent is 'misreport'")
        if self.mechanism in ("belief", "naive"):
            for name in ("type", "misreport"):
                v = getattr(self, name)
                if v is not None and (len(v) != self.n or min(v) < 0 or abs(sum(v) - 1) > 1e-9):
                    bad(name, f"must be a belief with n={self.n} entries summing to 1")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        """Canonical serialization (sorted keys, no whitespace variation)."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("record_timing")
        return hashlib.sha256(json.dumps(d, sort_keys=True, separators=(",", ":")).encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in names:
                raise ConfigError(f"unknown field '{key}'")
        try:
            cfg = cls(**data)
        except TypeError as exc:  # pragma: no cover - guarded above
            raise ConfigError(str(exc)) from exc
        return cfg.validate()

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError("top level must be a JSON object")
        return cls.from_dict(data)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None}).validate()
