"""Injected cloud-service latencies, in virtual milliseconds."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

from ..errors import ConfigError


def _default_fanout() -> dict[int, float]:
    return {4: 140.0, 8: 150.5, 12: 186.0, 16: 172.0}


@dataclass(frozen=True)
class LatencyProfile:
    table_get: float = 14.6
    table_put: float = 17.5
    notify_fanout: Mapping[int, float] = field(default_factory=_default_fanout)
    api_action: float = 105.0
    api_statistical: float = 14.4

    def validate(self) -> None:
        for name in ("table_get", "table_put", "api_action", "api_statistical"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "latency must be >= 0")
        if not self.notify_fanout:
            raise ConfigError("notify_fanout", "at least one tier is required")
        for tier, ms in self.notify_fanout.items():
            if ms < 0 or int(tier) < 1:
                raise ConfigError("notify_fanout", f"bad tier {tier}: {ms}")

    def fanout_ms(self, node_count: int) -> float:
        """Tier lookup without interpolation.

        An exact tier wins; otherwise the smallest tier above ``node_count``,
        or the largest tier when ``node_count`` exceeds them all.
        """
        tiers = sorted((int(k), float(v)) for k, v in self.notify_fanout.items())
        for tier, ms in tiers:
            if tier >= node_count:
                return ms
        return tiers[-1][1]

    def fanout(self, node_count: int) -> float:
        return self.fanout_ms(node_count) / 1000.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["notify_fanout"] = {str(k): v for k, v in sorted(self.notify_fanout.items())}
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> "LatencyProfile":
        known = {"table_get", "table_put", "notify_fanout", "api_action", "api_statistical"}
        extra = set(data) - known
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown latency profile field")
        kw = dict(data)
        if "notify_fanout" in kw:
            kw["notify_fanout"] = {int(k): float(v) for k, v in kw["notify_fanout"].items()}
        prof = cls(**kw)
        prof.validate()
        return prof

    @classmethod
    def load(cls, path: str | Path) -> "LatencyProfile":
        return cls.from_dict(json.loads(Path(path).read_text()))
