"""Run configuration and its ``key = value`` file format."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields, replace

from .bayes.evaluate import BayesConfig
from .bayes.model import RHO_MAX
from .bayes.sampler import SamplerConfig
from .perfdata import ColumnMap

__all__ = ["ConfigError", "RunConfig", "load_config", "FORMATS"]

FORMATS = ("json", "md", "svg")
SEED_ENV = "MODELCMP_SEED"


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_optional_float(text: str):
    return None if text.strip().lower() in ("", "none") else float(text)


def _parse_formats(text) -> tuple[str, ...]:
    items = text if isinstance(text, (tuple, list)) else [t.strip() for t in str(text).split(",")]
    items = tuple(t.lower() for t in items if t)
    bad = [t for t in items if t not in FORMATS]
    if bad or not items:
        raise ConfigError(f"formats must be a non-empty subset of {','.join(FORMATS)}, got {text!r}")
    return items


@dataclass(frozen=True)
class RunConfig:
    input: str | None = None
    columns: str = "value,resample,dataset,model"
    metric: str = "AUC"
    higher_is_better: bool = True
    alpha: float = 0.05
    rope: float = 0.01
    threshold: float = 0.95
    rho: float | None = None
    cv_train_frac: float | None = None
    chains: int = 4
    draws: int = 50000
    burn_in: int = 2500
    seed: int = 0
    out: str = "out"
    formats: tuple[str, ...] = FORMATS
    jobs: int | None = None
    force_posthoc: bool = False
    simplex: bool = False

    # keys that affect results; jobs/out/input only change where and how fast
    RESULT_KEYS = ("columns", "metric", "higher_is_better", "alpha", "rope", "threshold", "rho",
                   "cv_train_frac", "chains", "draws", "burn_in", "seed", "force_posthoc")

    def __post_init__(self):
        object.__setattr__(self, "formats", _parse_formats(self.formats))
        problems = []
        if not 0.0 < self.alpha < 1.0:
            problems.append(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (self.rope > 0 and math.isfinite(self.rope)):
            problems.append(f"rope must be positive, got {self.rope}")
        if not 0.5 < self.threshold <= 1.0:
            problems.append(f"threshold must lie in (0.5, 1], got {self.threshold}")
        if self.rho is not None and self.cv_train_frac is not None:
            problems.append("give either rho or cv_train_frac, not both")
        if self.rho is not None and not 0.0 < self.rho < 1.0:
            problems.append(f"rho must lie in (0, 1), got {self.rho}")
        if self.cv_train_frac is not None and not 0.0 < self.cv_train_frac < 1.0:
            problems.append(f"cv_train_frac must lie in (0, 1), got {self.cv_train_frac}")
        if self.chains < 1:
            problems.append("chains must be at least 1")
        if self.burn_in < 0:
            problems.append("burn_in must be nonnegative")
        if self.draws < self.chains * 2:
            problems.append("draws must give every chain at least two retained draws")
        if self.seed < 0:
            problems.append("seed must be nonnegative")
        if self.jobs is not None and self.jobs < 1:
            problems.append("jobs must be positive")
        try:
            ColumnMap.from_spec(self.columns)
        except ValueError as exc:
            problems.append(str(exc))
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def column_map(self) -> ColumnMap:
        return ColumnMap.from_spec(self.columns)

    def effective_rho(self) -> float:
        """Explicit rho, else n_test / n_train from the training fraction, else 10-fold (1/9)."""
        if self.rho is not None:
            return self.rho
        if self.cv_train_frac is not None:
            return min((1.0 - self.cv_train_frac) / self.cv_train_frac, RHO_MAX)
        return 1.0 / 9.0

    def bayes_config(self) -> BayesConfig:
        return BayesConfig(
            rope=self.rope,
            threshold=self.threshold,
            rho=self.effective_rho(),
            sampler=SamplerConfig(chains=self.chains, total_draws=self.draws, burn_in=self.burn_in),
        )

    def result_dict(self) -> dict:
        """The settings that determine results (recorded in report provenance)."""
        out = {key: getattr(self, key) for key in self.RESULT_KEYS}
        out["rho_effective"] = self.effective_rho()
        return out

    # ---- text format

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                text = "none"
            elif isinstance(value, tuple):
                text = ",".join(value)
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **overrides) -> "RunConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment. Overrides win."""
        values = {}
        names = {f.name: f for f in fields(cls)}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in names:
                raise ConfigError(f"config line {lineno}: unknown key {key!r}")
            try:
                values[key] = _convert(key, value)
            except (ValueError, ConfigError) as exc:
                raise ConfigError(f"config line {lineno}: bad value for {key}: {exc}") from None
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def with_overrides(self, **overrides) -> "RunConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


_CONVERTERS = {
    "input": lambda s: None if s.lower() == "none" else s,
    "columns": str,
    "metric": str,
    "higher_is_better": _parse_bool,
    "alpha": float,
    "rope": float,
    "threshold": float,
    "rho": _parse_optional_float,
    "cv_train_frac": _parse_optional_float,
    "chains": int,
    "draws": int,
    "burn_in": int,
    "seed": int,
    "out": str,
    "formats": _parse_formats,
    "jobs": lambda s: None if s.lower() == "none" else int(s),
    "force_posthoc": _parse_bool,
    "simplex": _parse_bool,
}


def _convert(key: str, value: str):
    return _CONVERTERS[key](value)


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def load_config(path: str | None, **overrides) -> RunConfig:
    """Read a config file (if any), apply the seed env default, then overrides."""
    text = ""
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    base = RunConfig.from_text(text)
    if "seed" not in _keys(text):
        base = replace(base, seed=default_seed())
    return base.with_overrides(**overrides)


def _keys(text: str) -> set[str]:
    keys = set()
    for raw in text.splitlines():
        line = raw.split("#", 1)[0]
        if "=" in line:
            keys.add(line.split("=", 1)[0].strip().replace("-", "_"))
    return keys
