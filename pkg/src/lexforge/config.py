"""Pipeline configuration file (JSON).

Precedence for every option: command-line flag, then the stage section of
the config file, then the built-in default. A stage ``seed`` falls back to
the top-level ``seed`` before the default.

Example::

    {
      "seed": 42,
      "dedup": {"num_perm": 256, "threshold": 0.9, "shingle_n": 5},
      "balance": {"targets": {"İÇTİHAT/Yargıtay/KARAR": 3510000}},
      "tokenizer": {"vocab_size": 48000, "min_frequency": 2},
      "masking": {"mlm_prob": 0.25, "max_len": 512},
      "window": {"size": 512, "stride": 256},
      "cloze": {"resamples": 10000, "level": 0.95},
      "seg": {"tolerance": 5}
    }
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

SECTIONS = {
    "dedup": {"num_perm", "threshold", "shingle_n", "seed", "exact_verify"},
    "balance": {"targets", "seed"},
    "tokenizer": {"vocab_size", "min_frequency", "max_word_chars", "seed_terms"},
    "masking": {"mlm_prob", "strategy_weights", "replace_probs", "span_len_p",
                "span_len_max", "seed", "max_len"},
    "window": {"size", "stride"},
    "cloze": {"resamples", "level", "seed", "case_fold"},
    "seg": {"tolerance"},
}
TOP_LEVEL = {"seed", "threads"}


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    seed: int | None = None
    threads: int | None = None
    sections: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def resolve(self, section: str, key: str, flag_value, default):
        if flag_value is not None:
            return flag_value
        sec = self.section(section)
        if key in sec:
            return sec[key]
        if key == "seed" and self.seed is not None:
            return self.seed
        return default


def parse_config(obj) -> PipelineConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(obj) - TOP_LEVEL - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    sections = {}
    for name, allowed in SECTIONS.items():
        sec = obj.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"section {name!r} must be an object")
        bad = set(sec) - allowed
        if bad:
            raise ConfigError(f"unknown keys in {name!r}: {sorted(bad)}")
        sections[name] = sec
    seed = obj.get("seed")
    threads = obj.get("threads")
    for key, val in (("seed", seed), ("threads", threads)):
        if val is not None and (not isinstance(val, int) or isinstance(val, bool)):
            raise ConfigError(f"{key} must be an integer")
    return PipelineConfig(seed, threads, sections)


def load_config(path: str | os.PathLike | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(obj)
