"""Experiment configuration: ``key = value`` lines, unknown keys rejected."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..errors import ConfigurationError, ParseError
from ..transfer import TransferSchedule

ALGORITHMS = ("a3c", "ppo", "ptf-a3c", "ptf-ppo")


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ints(text):
    return tuple(int(t) for t in text.replace(",", " ").split())


def _goals(text):
    """``x,y; x,y`` (grid) or ``x,y,r; ...`` (pinball targets)."""
    out = []
    for part in text.split(";"):
        part = part.strip()
        if part:
            out.append(tuple(float(v) for v in part.split(",")))
    return tuple(out)


@dataclass(frozen=True)
class ExperimentConfig:
    env: str = ""
    algorithm: str = "a3c"
    sources: str = ""               # manifest of source policy files (PTF only)
    transfer: str = "adaptive"
    seeds: tuple = (0,)
    episodes: int = 5000
    workers: int = 8
    deterministic: bool = True
    gamma: float = 0.99
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    option_lr: float = 1e-3
    beta_lr: float = 1e-3
    entropy_coef: float = -1.0      # negative: 1e-4 for a3c, 0.005 for ppo
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decrement: float = 1e-3
    option_batch: int = 32
    xi: float = 1e-3
    target_sync: int = 1000
    epsilon_unit: str = "episode"   # what the epsilon decrement counts: episode | step
    sync_unit: str = "episode"      # what target_sync counts: episode | step
    replay_capacity: int = 100_000
    t_max: int = 20
    hidden: tuple = (64, 64)
    option_hidden: tuple = (32, 32)
    distill_samples: int = 4
    f_offset: float = 3.0
    f_slope: float = 1e-3
    ppo_clip: float = 0.2
    ppo_epochs: int = 4
    ppo_minibatch: int = 64
    ppo_horizon: int = 512
    ppo_option_every: int = 20
    # source training
    source_goals: tuple = ()
    source_episodes: int = 5000
    source_threshold: float = 0.9
    source_check_every: int = 250
    source_seed: int = 0
    imperfect_window: int = 100
    eval_episodes: int = 100
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(
                f"algorithm must be one of {', '.join(ALGORITHMS)}, got {self.algorithm!r}")
        if not self.seeds:
            raise ConfigurationError("seeds must not be empty")
        if self.is_ptf and not self.sources:
            raise ConfigurationError(f"{self.algorithm} needs a source manifest (sources = ...)")
        TransferSchedule.parse(self.transfer)
        for name in ("episodes", "workers", "t_max", "option_batch", "replay_capacity",
                     "ppo_epochs", "ppo_minibatch", "ppo_horizon", "ppo_option_every",
                     "source_check_every", "imperfect_window"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        for name in ("epsilon_unit", "sync_unit"):
            if getattr(self, name) not in ("episode", "step"):
                raise ConfigurationError(f"{name} must be episode or step")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError("gamma must lie in (0, 1]")

    @property
    def is_ptf(self):
        return self.algorithm.startswith("ptf-")

    @property
    def learner(self):
        return self.algorithm.removeprefix("ptf-")

    @property
    def resolved_entropy(self):
        if self.entropy_coef >= 0:
            return self.entropy_coef
        return 1e-4 if self.learner == "a3c" else 0.005

    def path(self, value):
        """Resolve a path from the config relative to the config file."""
        p = Path(value)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def schedule(self):
        s = TransferSchedule.parse(self.transfer)
        s.offset, s.slope = self.f_offset, self.f_slope
        return s

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def describe(self):
        """``key = value`` lines of the fully resolved configuration."""
        lines = []
        for f in fields(self):
            if f.name == "base_dir":
                continue
            v = getattr(self, f.name)
            if f.name == "entropy_coef":
                v = self.resolved_entropy
            lines.append(f"{f.name} = {format_value(v)}")
        return lines


def format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(",".join(_fmt_num(c) for c in g) for g in v)
        return ",".join(_fmt_num(c) for c in v)
    if isinstance(v, float):
        return _fmt_num(v)
    return str(v)


def _fmt_num(v):
    if isinstance(v, float):
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    return str(v)


_PARSERS = {
    "seeds": _ints, "hidden": _ints, "option_hidden": _ints, "source_goals": _goals,
    "deterministic": _bool,
}


def parse_config(text, base_dir="."):
    known = {f.name: f for f in fields(ExperimentConfig) if f.name != "base_dir"}
    defaults = ExperimentConfig.__dataclass_fields__
    values = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ParseError(i, "key = value", f"no '=' in {line!r}")
        if key not in known:
            raise ParseError(i, "unknown key", key)
        if key in values:
            raise ParseError(i, "duplicate key", key)
        parser = _PARSERS.get(key)
        if parser is None:
            default = defaults[key].default
            parser = type(default) if not isinstance(default, str) else str
        try:
            values[key] = parser(val)
        except ValueError as exc:
            raise ParseError(i, f"value of {key}", str(exc)) from None
    try:
        return ExperimentConfig(base_dir=str(base_dir), **values)
    except ConfigurationError as exc:
        raise ParseError(0, "config invariant", str(exc)) from None


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)
