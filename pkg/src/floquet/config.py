"""Run configuration and run records.

A configuration is a YAML mapping::

    model:
      variant: iid
      dimension: 2
      norm: ell1
      entry: {dist: uniform, low: 1.0, high: 2.0}
    seeds: [0, 1, 2, 3]
    horizon: 100000
    burn_in: 10000        # default horizon // 10
    tol: 1.0e-12          # pullback certificate target
    cap: 16384            # pullback depth cap
    step: null            # skeleton step, default: primitivity index
    focus: null           # focus vector e, default: normalized ones
    options: {}           # command specific

``compare`` additionally takes either ``model_hi`` (a second model mapping) or
``coupling: {scale: 1.1, offset: [[...]]}``, which builds the upper model
from ``model`` on the same random draws.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .cocycle import CocycleModel, ConfigError, model_from_dict
from .ordered_space import ones_unit

SCHEMA_VERSION = "1.0.0"
SEED_MAX = 2 ** 64

_KEYS = {"model", "model_hi", "coupling", "seeds", "horizon", "burn_in", "tol", "cap", "step",
         "focus", "options"}


def _int(x, what: str, lo: int = 0) -> int:
    if isinstance(x, bool) or not isinstance(x, (int, np.integer)):
        raise ConfigError(f"{what} must be an integer, got {x!r}")
    if x < lo:
        raise ConfigError(f"{what} must be >= {lo}")
    return int(x)


@dataclass(eq=True)
class RunConfig:
    model: dict
    seeds: list
    horizon: int
    burn_in: Optional[int] = None
    tol: float = 1e-12
    cap: int = 2 ** 14
    step: Optional[int] = None
    focus: Optional[list] = None
    model_hi: Optional[dict] = None
    coupling: Optional[dict] = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        # normalized mapping, so that equal models compare equal
        self.model = self.build_model().to_dict()
        if self.model_hi is not None:
            self.model_hi = model_from_dict(self.model_hi).to_dict()
        if not isinstance(self.seeds, (list, tuple)) or not self.seeds:
            raise ConfigError("seeds must be a non-empty list")
        self.seeds = [_int(s, "seed") for s in self.seeds]
        if any(s >= SEED_MAX for s in self.seeds):
            raise ConfigError("seeds must fit in 64 bits")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        self.horizon = _int(self.horizon, "horizon", 2)
        if self.burn_in is not None:
            self.burn_in = _int(self.burn_in, "burn_in")
            if self.burn_in >= self.horizon:
                raise ConfigError("burn_in must be smaller than horizon")
        if isinstance(self.tol, str):
            self.tol = float(self.tol)
        if not (isinstance(self.tol, (int, float)) and self.tol > 0):
            raise ConfigError("tol must be positive")
        self.tol = float(self.tol)
        self.cap = _int(self.cap, "cap", 2)
        if self.step is not None:
            self.step = _int(self.step, "step", 1)
        if self.focus is not None:
            e = np.asarray(self.focus, dtype=float)
            if e.shape != (self.dimension,) or not np.all(e > 0):
                raise ConfigError("focus must be a strictly positive vector of the model dimension")
            if not np.dot(e, ones_unit(self.dimension)) > 0:
                raise ConfigError("<e, e*> must be positive")
            self.focus = e.tolist()
        if self.model_hi is not None and self.coupling is not None:
            raise ConfigError("give either model_hi or coupling, not both")
        if self.coupling is not None:
            extra = set(self.coupling) - {"scale", "offset"}
            if extra:
                raise ConfigError(f"coupling: unexpected keys {sorted(extra)}")
        if self.model_hi is not None or self.coupling is not None:
            hi = self.build_model_hi()
            if hi.dimension != self.dimension:
                raise ConfigError("compared models must share the dimension")
        if not isinstance(self.options, dict):
            raise ConfigError("options must be a mapping")

    @property
    def dimension(self) -> int:
        return self.build_model().dimension

    def build_model(self) -> CocycleModel:
        return model_from_dict(self.model)

    def build_model_hi(self) -> CocycleModel:
        if self.model_hi is not None:
            return model_from_dict(self.model_hi)
        if self.coupling is None:
            raise ConfigError("compare needs model_hi or coupling")
        c = self.coupling
        try:
            return self.build_model().with_transform(float(c.get("scale", 1.0)), c.get("offset"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"coupling: {exc}") from None

    def option(self, key: str, default: Any = None) -> Any:
        return self.options.get(key, default)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a mapping")
        extra = set(d) - _KEYS
        if extra:
            raise ConfigError(f"unexpected configuration keys {sorted(extra)}")
        for key in ("model", "seeds", "horizon"):
            if key not in d:
                raise ConfigError(f"missing configuration key {key!r}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = {"model": dict(self.model), "seeds": list(self.seeds),
             "horizon": self.horizon, "burn_in": self.burn_in, "tol": self.tol, "cap": self.cap,
             "step": self.step, "focus": self.focus, "options": dict(self.options)}
        if self.model_hi is not None:
            d["model_hi"] = dict(self.model_hi)
        if self.coupling is not None:
            d["coupling"] = dict(self.coupling)
        return d

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def parse_config(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    return RunConfig.from_dict(data)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror}") from None
    return parse_config(text)


# --------------------------------------------------------------------------
# records


def jsonable(x):
    """Plain JSON types; non-finite floats become None."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if hasattr(x, "to_dict"):
        return jsonable(x.to_dict())
    if x is None or isinstance(x, str):
        return x
    return str(x)


def load_schema() -> dict:
    return json.loads(resources.files("floquet").joinpath("schema/run_record.schema.json").read_text())


@dataclass
class RunRecord:
    command: str
    config: dict
    status: str = "ok"
    results: dict = field(default_factory=dict)
    replicates: list = field(default_factory=list)
    focusing: Optional[dict] = None
    errors: list = field(default_factory=list)
    steps: int = 0
    outputs: list = field(default_factory=list)
    backend: str = ""
    timing: dict = field(default_factory=dict)

    def payload(self) -> dict:
        """Everything except timing: identical across repeated runs."""
        return jsonable({"schema_version": SCHEMA_VERSION, "command": self.command,
                         "status": self.status, "backend": self.backend, "config": self.config,
                         "results": self.results, "replicates": self.replicates,
                         "focusing": self.focusing, "errors": self.errors,
                         "steps": self.steps, "outputs": sorted(self.outputs)})

    def to_dict(self) -> dict:
        d = self.payload()
        d["timing"] = jsonable(self.timing)
        return d

    def validate(self) -> None:
        import jsonschema
        jsonschema.validate(self.to_dict(), load_schema())

    def write(self, path) -> None:
        self.validate()
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
