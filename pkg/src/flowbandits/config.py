"""TOML experiment configuration.

Every key is optional; omitted keys take the defaults of
:class:`~flowbandits.harness.ExperimentConfig` (3 pages x 3 candidates,
alphas 1/1/2, 14000 steps in batches of 1000, 100 runs). Example::

    pages = 3
    candidates = 3            # or one count per page: [3, 2, 4]
    context = "categorical:3" # or "none"
    alpha1 = 1.0
    alpha_c = 1.0
    alpha2 = 2.0
    base_rate = 0.1
    steps = 14000
    batch_size = 1000
    runs = 30
    seed = 7
    agents = ["mdp_with_bandits", "interaction_bandits", "independent_bandits", "q_learning"]
    regret_mode = "realized"  # or "expected"
    incompatible = [[1, 0, 2]]  # [page, previous action, current action], 0-based

    [q_learning]
    learning_rate = 0.05
    discount = 1.0
    epsilon_start = 0.05
    epsilon_end = 0.01

    [mdp_with_bandits]
    formulas = ["R ~ a_i", "R ~ a_i + a_prev + a_prev:a_i", "R ~ a_i + a_prev + a_prev:a_i"]

    [sweep]
    axis = "pages"            # or "alpha2"
    values = [2, 3, 4, 5, 6]
"""

from __future__ import annotations

import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Iterable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .agents import AgentKind
from .harness import ConfigError, ExperimentConfig, QLearningParams

_SCALAR_KEYS = {
    f.name for f in fields(ExperimentConfig) if f.name not in ("q_learning", "formulas")
}
_Q_KEYS = {f.name for f in fields(QLearningParams)}
_BANDIT_SECTIONS = {str(k) for k in AgentKind if k is not AgentKind.Q_LEARNING}
_SWEEP_KEYS = {"axis", "values"}


def load_toml(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"{path}: {exc}") from None


def parse_value(text: str) -> Any:
    """Interpret an override value as TOML, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides: Iterable[str]) -> dict:
    """Apply ``key=value`` strings (dotted keys reach into sections) to a raw config dict."""
    raw = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    for item in overrides:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError("--set", f"expected key=value, got {item!r}")
        *sections, leaf = key.split(".")
        node = raw
        for s in sections:
            node = node.setdefault(s, {})
            if not isinstance(node, dict):
                raise ConfigError(key, f"{s} is not a section")
        node[leaf] = parse_value(value.strip())
    return raw


def split_sweep(raw: dict) -> tuple[dict, dict]:
    raw = dict(raw)
    sweep = raw.pop("sweep", {})
    if not isinstance(sweep, dict):
        raise ConfigError("sweep", "must be a section")
    for key in sweep:
        if key not in _SWEEP_KEYS:
            raise ConfigError(f"sweep.{key}", "unknown key")
    return raw, sweep


def build_config(raw: dict) -> ExperimentConfig:
    kwargs: dict[str, Any] = {}
    formulas = []
    for key, value in raw.items():
        if key == "q_learning":
            if not isinstance(value, dict):
                raise ConfigError(key, "must be a section")
            for k in value:
                if k not in _Q_KEYS:
                    raise ConfigError(f"q_learning.{k}", "unknown key")
            try:
                kwargs["q_learning"] = QLearningParams(**{k: float(v) for k, v in value.items()})
            except (TypeError, ValueError) as exc:
                raise ConfigError("q_learning", str(exc)) from None
        elif key in _BANDIT_SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(key, "must be a section")
            for k, v in value.items():
                if k != "formulas":
                    raise ConfigError(f"{key}.{k}", "unknown key")
                if not isinstance(v, list) or not all(isinstance(s, str) for s in v):
                    raise ConfigError(f"{key}.formulas", "must be a list of formula strings")
                formulas.append((key, tuple(v)))
        elif key in _SCALAR_KEYS:
            kwargs[key] = _coerce(key, value)
        else:
            raise ConfigError(key, "unknown key")
    if formulas:
        kwargs["formulas"] = tuple(formulas)
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        bad = next((k for k in kwargs if k in str(exc)), "config")
        raise ConfigError(bad, str(exc)) from None


_INT_KEYS = {"pages", "steps", "batch_size", "runs", "seed", "workers"}
_FLOAT_KEYS = {"alpha1", "alpha_c", "alpha2", "base_rate", "learner_beta", "prior_mean", "prior_var"}
_BOOL_KEYS = {"context_main_all_pages", "dump_ground_truth", "save_state"}


def _coerce(key: str, value: Any) -> Any:
    try:
        if key in _INT_KEYS:
            if isinstance(value, bool) or int(value) != value:
                raise ValueError
            return int(value)
        if key in _FLOAT_KEYS:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if key in _BOOL_KEYS:
            if not isinstance(value, bool):
                raise ValueError
            return value
        if key == "candidates":
            if isinstance(value, list):
                return tuple(int(v) for v in value)
            return int(value)
        if key == "agents":
            if isinstance(value, str):
                value = [value]
            return tuple(AgentKind(v) for v in value)
        if key == "incompatible":
            return tuple(tuple(int(x) for x in t) for t in value)
        if key in ("context", "regret_mode"):
            if not isinstance(value, str):
                raise ValueError
            return value
    except (TypeError, ValueError):
        raise ConfigError(key, f"invalid value {value!r}") from None
    return value


def parse_config(path: str | Path | None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Load, override and validate an experiment config (``path=None`` means all defaults)."""
    config, _ = parse_config_and_sweep(path, overrides)
    return config


def parse_config_and_sweep(path: str | Path | None, overrides: Iterable[str] = ()) -> tuple[ExperimentConfig, dict]:
    raw = load_toml(path) if path is not None else {}
    raw = apply_overrides(raw, overrides)
    raw, sweep = split_sweep(raw)
    return build_config(raw), sweep
