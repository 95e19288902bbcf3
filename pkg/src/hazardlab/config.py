"""Run configuration files.

An INI-style text file with one section per component::

    [run]
    seed = 3
    variant = full

    [train]
    epochs = 20

Every key has the type of its default value; tuples are comma separated.
Unknown sections or keys, duplicates and unparsable values raise
:class:`~hazardlab.errors.ConfigError`.  Missing keys keep their defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError, HazardLabError
from .fileio import config_hash
from .loss import LossConfig
from .metrics import LogRankConfig
from .model.network import VARIANTS, ModelConfig, variant_config
from .model.training import TrainConfig
from .risk_strata import StratSearchConfig
from .survival_core import DEFAULT_RISK_LIMITS, RiskGroupBoundaries, TimeGrid
from .synthcohort import CohortConfig


@dataclass(frozen=True)
class GridConfig:
    interval_count: int = 28
    interval_length: float = 3.0


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    variant: str = ""


@dataclass(frozen=True)
class SearchSection:
    candidate_limits: tuple = StratSearchConfig().candidate_limits
    group_count_min: int = 2
    group_count_max: int = 8
    max_combinations: int = 200_000


@dataclass(frozen=True)
class StrataSection:
    limits: tuple = DEFAULT_RISK_LIMITS


@dataclass(frozen=True)
class EvalSection:
    dcal_bins: int = 10
    significance: float = 0.05
    interpolate: bool = True


# section name -> (dataclass, keys filled from elsewhere)
_SECTIONS = {
    "run": (RunSection, ()),
    "grid": (GridConfig, ()),
    "model": (ModelConfig, ("interval_count", "seed")),
    "loss": (LossConfig, ()),
    "train": (TrainConfig, ()),
    "cohort": (CohortConfig, ("interval_count", "interval_length", "seed")),
    "logrank": (LogRankConfig, ()),
    "search": (SearchSection, ()),
    "strata": (StrataSection, ()),
    "eval": (EvalSection, ()),
}


def _keys(section: str) -> dict:
    cls, skip = _SECTIONS[section]
    return {f.name: f for f in dataclasses.fields(cls) if f.name not in skip}


def _default(f):
    if f.default is not dataclasses.MISSING:
        return f.default
    return f.default_factory()


def _parse(raw: str, default, where: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            states = configparser.ConfigParser.BOOLEAN_STATES
            if raw.lower() not in states:
                raise ValueError(f"not a boolean: {raw!r}")
            return states[raw.lower()]
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            elem = type(default[0]) if default else float
            return tuple(elem(x) for x in items)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one command invocation."""

    values: dict = field(default_factory=dict)  # section -> {key: value}

    def section(self, name: str) -> dict:
        merged = {k: _default(f) for k, f in _keys(name).items()}
        merged.update(self.values.get(name, {}))
        return merged

    @property
    def seed(self) -> int:
        return int(self.section("run")["seed"])

    def with_overrides(self, section: str, **kv) -> "RunConfig":
        keys = _keys(section)
        for k in kv:
            if k not in keys:
                raise ConfigError(f"[{section}] has no key {k!r}")
        values = {s: dict(v) for s, v in self.values.items()}
        values.setdefault(section, {}).update(kv)
        out = RunConfig(values)
        out.validate()
        return out

    # -- component configs ------------------------------------------------

    def grid(self) -> TimeGrid:
        g = GridConfig(**self.section("grid"))
        try:
            return TimeGrid.uniform(g.interval_count, g.interval_length)
        except HazardLabError as exc:
            raise ConfigError(f"[grid] {exc}") from None

    def model(self) -> ModelConfig:
        run = self.section("run")
        cfg = self._build("model", ModelConfig, interval_count=self.grid().interval_count, seed=self.seed)
        if run["variant"]:
            if run["variant"] not in VARIANTS:
                raise ConfigError(f"[run] unknown variant {run['variant']!r}; choose from {sorted(VARIANTS)}")
            cfg = variant_config(run["variant"], cfg)
        return cfg

    def loss(self) -> LossConfig:
        return self._build("loss", LossConfig)

    def train(self) -> TrainConfig:
        return self._build("train", TrainConfig)

    def cohort(self) -> CohortConfig:
        g = GridConfig(**self.section("grid"))
        return self._build("cohort", CohortConfig, interval_count=g.interval_count,
                           interval_length=g.interval_length, seed=self.seed)

    def logrank(self) -> LogRankConfig:
        return self._build("logrank", LogRankConfig)

    def search(self) -> StratSearchConfig:
        s = self.section("search")
        try:
            return StratSearchConfig(s["candidate_limits"], (s["group_count_min"], s["group_count_max"]),
                                     self.logrank(), s["max_combinations"])
        except HazardLabError as exc:
            raise ConfigError(f"[search] {exc}") from None

    def boundaries(self) -> RiskGroupBoundaries:
        try:
            return RiskGroupBoundaries(self.section("strata")["limits"])
        except HazardLabError as exc:
            raise ConfigError(f"[strata] {exc}") from None

    def evaluation(self) -> EvalSection:
        return EvalSection(**self.section("eval"))

    def _build(self, name, cls, **fixed):
        try:
            return cls(**self.section(name), **fixed)
        except (HazardLabError, TypeError, ValueError) as exc:
            raise ConfigError(f"[{name}] {exc}") from None

    def validate(self) -> None:
        self.grid()
        self.model()
        self.loss()
        self.train()
        self.cohort()
        self.search()
        self.boundaries()
        ev = self.evaluation()
        if ev.dcal_bins < 1 or not 0.0 < ev.significance < 1.0:
            raise ConfigError("[eval] dcal_bins >= 1 and 0 < significance < 1 required")

    # -- text form ----------------------------------------------------------

    def dump(self) -> str:
        """Canonical text with every key spelled out."""
        lines = []
        for name in _SECTIONS:
            lines.append(f"[{name}]")
            for k, v in self.section(name).items():
                lines.append(f"{k} = {_render(v)}")
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        return config_hash(self.dump())


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, strict=True, empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = {}
    for name in cp.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{name}]")
        keys = _keys(name)
        vals = {}
        for k, raw in cp.items(name):
            if k not in keys:
                raise ConfigError(f"{source}: unknown key {k!r} in [{name}]")
            vals[k] = _parse(raw, _default(keys[k]), f"{source}: [{name}] {k}")
        values[name] = vals
    if cp.defaults():
        raise ConfigError(f"{source}: keys outside any section")
    cfg = RunConfig(values)
    cfg.validate()
    return cfg


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))
