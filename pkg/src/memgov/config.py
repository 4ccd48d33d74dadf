"""Governance configuration: every policy constant as a flat dotted key.

The config file is a flat JSON object whose keys are exactly the names in
``GovernanceConfig.keys()``. Omitted keys take their defaults; unknown keys
are rejected.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError


def _key(name: str, owner: str, default: Any) -> Any:
    return field(default=default, metadata={"key": name, "owner": owner})


@dataclass(frozen=True)
class GovernanceConfig:
    # forgetting curve and stability growth
    fsrs_factor: float = _key("fsrs.factor", "lifecycle", 19 / 9)
    fsrs_w8: float = _key("fsrs.w8", "lifecycle", 0.5)
    fsrs_difficulty_exponent: float = _key("fsrs.difficulty_exponent", "lifecycle", 1.5)
    fsrs_S0: float = _key("fsrs.S0", "store", 1.0)
    fsrs_D0: float = _key("fsrs.D0", "store", 5.0)
    # background maintenance
    entropy_threshold: float = _key("entropy.threshold", "lifecycle", 0.4)
    entropy_window: int = _key("entropy.window", "lifecycle", 0)
    lifecycle_delete_below: float = _key("lifecycle.delete_below", "lifecycle", 0.3)
    lifecycle_consolidate_upto: float = _key("lifecycle.consolidate_upto", "lifecycle", 0.7)
    lifecycle_group_similarity: float = _key("lifecycle.group_similarity", "lifecycle", 0.6)
    # trust tracking
    kalman_Q: float = _key("kalman.Q", "utility", 0.05)
    kalman_R: float = _key("kalman.R", "utility", 0.1)
    kalman_U0: float = _key("kalman.U0", "store", 0.5)
    kalman_P0: float = _key("kalman.P0", "store", 1.0)
    usage_threshold: float = _key("usage.threshold", "utility", 0.3)
    # read path
    gate_threshold: float = _key("gate.threshold", "retrieval", 0.1)
    hebbian_threshold: float = _key("hebbian.threshold", "retrieval", 0.7)
    hebbian_gate_expanded: bool = _key("hebbian.gate_expanded", "retrieval", False)
    scoring_fact_lambda: float = _key("scoring.fact_lambda", "retrieval", 0.0)
    scoring_reasoning_lambda: float = _key("scoring.reasoning_lambda", "retrieval", 1.0)
    scoring_multihop_lambda: float = _key("scoring.multihop_lambda", "retrieval", 0.5)
    scoring_multihop_beta: float = _key("scoring.multihop_beta", "retrieval", 1.5)
    temporal_lambda: float = _key("temporal.lambda", "retrieval", 0.5)
    fanout: int = _key("retrieval.fanout", "retrieval", 20)
    budget_total_window: int = _key("budget.total_window", "retrieval", 8192)
    budget_reasoning_reserve: int = _key("budget.reasoning_reserve", "retrieval", 2048)
    budget_recall_reserve: int = _key("budget.recall_reserve", "retrieval", 300)
    budget_avg_gate: float = _key("budget.avg_gate", "retrieval", 0.4)
    budget_reserve_mode: str = _key("budget.reserve_mode", "retrieval", "absolute")
    budget_reasoning_fraction: float = _key("budget.reasoning_fraction", "retrieval", 0.3)
    budget_recall_fraction: float = _key("budget.recall_fraction", "retrieval", 0.1)
    token_factor: float = _key("budget.token_factor", "retrieval", 1.3)
    # governance
    auth_user: float = _key("auth.user", "governance", 1.0)
    auth_agent: float = _key("auth.agent", "governance", 0.7)
    auth_external: float = _key("auth.external", "governance", 0.5)
    recency_tau_days: float = _key("conflict.tau_days", "governance", 30.0)
    auto_resolve_conflicts: bool = _key("conflict.auto_resolve", "engine", False)
    # store
    embedding_dim: int = _key("embedding.dim", "store", 512)
    # adapters
    adapter_timeout: float = _key("adapter.timeout", "adapters", 10.0)
    adapter_retries: int = _key("adapter.retries", "adapters", 2)
    adapter_backoff: float = _key("adapter.backoff", "adapters", 0.5)
    adapter_max_in_flight: int = _key("adapter.max_in_flight", "adapters", 4)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        def unit(name: str, value: float) -> None:
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value!r}")

        def positive(name: str, value: float) -> None:
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value!r}")

        for name in ("fsrs.factor", "fsrs.S0", "kalman.Q", "kalman.R", "kalman.P0",
                     "conflict.tau_days", "embedding.dim", "retrieval.fanout",
                     "budget.token_factor", "adapter.timeout", "adapter.max_in_flight"):
            positive(name, self.get(name))
        for name in ("entropy.threshold", "lifecycle.delete_below", "lifecycle.consolidate_upto",
                     "kalman.U0", "usage.threshold", "gate.threshold", "hebbian.threshold",
                     "budget.reasoning_fraction", "budget.recall_fraction",
                     "auth.user", "auth.agent", "auth.external"):
            unit(name, self.get(name))
        if not 1.0 <= self.fsrs_D0 <= 10.0:
            raise ConfigError("fsrs.D0 must lie in [1, 10]")
        if self.lifecycle_delete_below > self.lifecycle_consolidate_upto:
            raise ConfigError("lifecycle.delete_below must not exceed lifecycle.consolidate_upto")
        if not -1.0 <= self.lifecycle_group_similarity <= 1.0:
            raise ConfigError("lifecycle.group_similarity must lie in [-1, 1]")
        if self.budget_reserve_mode not in ("absolute", "percent"):
            raise ConfigError("budget.reserve_mode must be 'absolute' or 'percent'")
        if self.budget_recall_reserve < 0 or self.budget_reasoning_reserve < self.budget_recall_reserve:
            raise ConfigError("budget reserves must satisfy 0 <= recall <= reasoning")
        if self.budget_total_window <= self.budget_reasoning_reserve:
            raise ConfigError("budget.total_window must exceed budget.reasoning_reserve")
        for name in ("fsrs.w8", "fsrs.difficulty_exponent", "scoring.fact_lambda",
                     "scoring.reasoning_lambda", "scoring.multihop_lambda",
                     "scoring.multihop_beta", "temporal.lambda", "adapter.backoff",
                     "adapter.retries", "entropy.window"):
            if self.get(name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    @classmethod
    def keys(cls) -> list[str]:
        return [f.metadata["key"] for f in dataclasses.fields(cls)]

    @classmethod
    def owners(cls) -> dict[str, str]:
        return {f.metadata["key"]: f.metadata["owner"] for f in dataclasses.fields(cls)}

    @classmethod
    def _field_for(cls, key: str) -> dataclasses.Field:
        for f in dataclasses.fields(cls):
            if f.metadata["key"] == key:
                return f
        raise ConfigError(f"unknown config key {key!r}")

    def get(self, key: str) -> Any:
        return getattr(self, self._field_for(key).name)

    def to_dict(self) -> dict[str, Any]:
        return {f.metadata["key"]: getattr(self, f.name) for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> GovernanceConfig:
        kwargs = {}
        for key, value in values.items():
            f = cls._field_for(key)
            kwargs[f.name] = _coerce(key, f.default, value)
        return cls(**kwargs)

    def replace(self, **overrides: Any) -> GovernanceConfig:
        """Copy with dotted-key overrides, e.g. ``cfg.replace(**{"kalman.Q": 0.1})``."""
        merged = self.to_dict()
        for key in overrides:
            self._field_for(key)
        merged.update(overrides)
        return GovernanceConfig.from_dict(merged)

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _coerce(key: str, default: Any, value: Any) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number")
        return float(value)
    if not isinstance(value, type(default)):
        raise ConfigError(f"{key} must be a {type(default).__name__}")
    return value


def load_config(path: str | Path | None = None) -> GovernanceConfig:
    if path is None:
        return GovernanceConfig()
    try:
        values = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigError("config file must hold a flat key-value object")
    return GovernanceConfig.from_dict(values)


def dump_config(config: GovernanceConfig) -> str:
    return json.dumps(config.to_dict(), indent=2) + "\n"
