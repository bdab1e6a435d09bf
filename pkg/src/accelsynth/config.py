"""Global numerical tolerances and run configuration.

Defaults can be overridden from a JSON file whose path is given by the
``ACCELSYNTH_CONFIG`` environment variable, e.g.::

    {"tol_feas": 1e-8, "r_var": 1e5}
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

CONFIG_ENV = "ACCELSYNTH_CONFIG"


@dataclass(frozen=True)
class RunConfig:
    tol_feas: float = 1e-7
    tol_bisect: float = 1e-4
    tol_schur: float = 1e-10
    tol_rank: float = 1e-12
    tol_minreal: float = 1e-8
    max_iter: int = 80
    r_var: float = 1e6
    margin_cap: float = 1.0
    output: str = "json"
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("tol_feas", "tol_bisect", "tol_schur", "tol_rank", "tol_minreal", "r_var", "margin_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.output not in ("json", "csv"):
            raise ValueError("output must be 'json' or 'csv'")

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            data = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def default_config() -> RunConfig:
    path = os.environ.get(CONFIG_ENV)
    if path:
        return RunConfig.from_file(path)
    return RunConfig()
