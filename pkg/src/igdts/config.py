"""Flat ``key = value`` configuration files for the command-line tools."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from igdts.geometry import STATE_FIELDS
from igdts.tracker import MotionModel, TrackerConfig

CONFIG_ENV = "IGDTS_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ConfigKey:
    name: str
    kind: type
    help: str
    from_paper: bool = False


KEYS = {
    k.name: k
    for k in [
        ConfigKey("n_particles", int, "particles per frame", True),
        ConfigKey("patch_side", int, "side of the square template patch in pixels", True),
        ConfigKey("k_basis", int, "number of subspace basis vectors", True),
        ConfigKey("update_interval", int, "frames between subspace updates", True),
        ConfigKey("lambda_max", float, "largest threshold in the lambda sequence"),
        ConfigKey("lambda_min_ratio", float, "smallest/largest threshold ratio of the linear sequence"),
        ConfigKey("kappa", float, "likelihood sharpness, p = exp(-kappa * d)"),
        *[ConfigKey(f"sigma_{n}", float, f"random-walk std of {n}") for n in STATE_FIELDS],
        ConfigKey("forgetting", float, "forgetting factor of the incremental update"),
        ConfigKey("seed", int, "random seed"),
        ConfigKey("subspace_eps", float, "convergence tolerance of the per-particle solve"),
        ConfigKey("subspace_max_iter", int, "iteration cap of the per-particle solve"),
        ConfigKey("lost_policy", str, "'coast' or 'halt' when every particle is off-frame"),
        ConfigKey("workers", int, "threads for particle evaluation"),
        ConfigKey("eps", float, "regression stopping tolerance on |dMSE|"),
        ConfigKey("max_iter", int, "regression iteration cap"),
    ]
}


@dataclass
class Config:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    eps: float = 1e-8
    max_iter: int = 500

    def as_dict(self) -> dict:
        out = {f.name: getattr(self.tracker, f.name) for f in fields(TrackerConfig) if f.name != "motion"}
        for n, s in zip(STATE_FIELDS, self.tracker.motion.sigma_diag):
            out[f"sigma_{n}"] = s
        out["eps"] = self.eps
        out["max_iter"] = self.max_iter
        return out

    def with_overrides(self, values: Mapping[str, Any]) -> "Config":
        """Return a copy with ``values`` applied; ``None`` entries are skipped."""
        values = {k: v for k, v in values.items() if v is not None}
        for k in values:
            if k not in KEYS:
                raise ConfigError(f"unknown config key '{k}'")
        current = self.as_dict()
        current.update({k: KEYS[k].kind(v) for k, v in values.items()})
        sig = tuple(current.pop(f"sigma_{n}") for n in STATE_FIELDS)
        eps = current.pop("eps")
        max_iter = current.pop("max_iter")
        if eps <= 0 or max_iter < 1:
            raise ConfigError("eps must be positive and max_iter at least 1")
        tracker = replace(self.tracker, motion=MotionModel(sig), **current)
        return Config(tracker, float(eps), int(max_iter))


def _convert(key: str, raw: str, where: str):
    kind = KEYS[key].kind
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: bad value {raw!r} for '{key}'") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{where}: unknown config key '{key}'")
        values[key] = _convert(key, raw, where)
    return values


def load_config(path=None) -> Config:
    """Read ``path``, or the file named by ``$IGDTS_CONFIG``, over the defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return Config()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return Config().with_overrides(parse_config_text(path.read_text(), str(path)))


def describe_keys() -> str:
    """Key reference for ``--help`` text, with defaults."""
    defaults = Config().as_dict()
    lines = ["config keys (key = value, # comments):"]
    for k in KEYS.values():
        tag = "" if k.from_paper else " (not from paper)"
        lines.append(f"  {k.name} = {defaults[k.name]}  {k.help}{tag}")
    return "\n".join(lines)


def dump_config(cfg: Config) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.as_dict().items())
