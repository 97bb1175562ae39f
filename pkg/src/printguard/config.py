"""Run configuration: every tunable constant in one plain-text file.

Format is one ``key = value`` per line; blank lines and ``#`` comments are
ignored. Unknown keys are rejected and every value is validated against its
documented range, so a config file is a complete, checkable record of a
run. `resolved_text` renders defaults plus overrides back out, which each
command echoes into its output directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .dataset import GenerationConfig
from .errorsim import ErrorConfig, ErrorKind
from .nn import Architecture, TrainConfig

ENV_SEED = "PRINTGUARD_SEED"


class ConfigError(ValueError):
    pass


def _positive(v):
    return v > 0


def _non_negative(v):
    return v >= 0


def _fraction(v):
    return 0 < v <= 1


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (type, default, validator, documented range)
_SCHEMA: dict[str, tuple] = {
    "master_seed": (int, 1, lambda v: 0 <= v < 2 ** 64, "0 .. 2^64-1"),
    "train_seed": (int, 1, lambda v: 0 <= v < 2 ** 64, "0 .. 2^64-1"),
    # dataset composition
    "count_good": (int, 10000, _non_negative, ">= 0"),
    "count_blot": (int, 5000, _non_negative, ">= 0"),
    "count_lpe": (int, 2000, _non_negative, ">= 0"),
    "count_lse": (int, 2000, _non_negative, ">= 0"),
    "count_lse_vertical": (int, 1000, _non_negative, ">= 0"),
    # text rendering
    "word_len_lo": (int, 2, _positive, ">= 1"),
    "word_len_hi": (int, 8, _positive, ">= word_len_lo"),
    "kerning": (int, -2, lambda v: -29 <= v <= 30, "-29 .. 30"),
    "margin": (int, 4, _non_negative, ">= 0"),
    "glyph_scale": (int, 6, _positive, ">= 1"),
    # wedge errors
    "girth_lo": (float, 2.0, _positive, "> 0"),
    "girth_hi": (float, 8.0, _positive, ">= girth_lo"),
    "line_count_factor": (float, 1.5, _positive, "> 0"),
    "angle_std": (float, 0.05, _non_negative, ">= 0"),
    "angle_std_vertical": (float, 0.01, _non_negative, ">= 0"),
    "len_mean_factor": (float, 0.35, _positive, "> 0"),
    "len_std_factor": (float, 0.1, _non_negative, ">= 0"),
    # blot errors
    "blot_radius_lo": (float, 3.0, _positive, "> 0"),
    "blot_radius_hi": (float, 7.0, _positive, ">= blot_radius_lo"),
    "blot_splash_lo": (float, 0.5, _non_negative, ">= 0"),
    "blot_splash_hi": (float, 2.5, _non_negative, ">= blot_splash_lo"),
    "blot_rays": (int, 720, lambda v: v >= 16, ">= 16 (angular density bound)"),
    # corruption acceptance
    "visibility_min_pixels": (int, 25, _positive, ">= 1"),
    "max_attempts": (int, 50, _positive, ">= 1"),
    # sheet segmentation
    "row_noise_tolerance": (int, 2, _non_negative, ">= 0"),
    "min_row_gap": (int, 10, _positive, ">= 1"),
    "min_col_gap": (int, 12, _positive, ">= 1"),
    "box_padding": (int, 4, _non_negative, ">= 0"),
    # training
    "learning_rate": (float, 0.1, _positive, "> 0"),
    "momentum": (float, 0.1, lambda v: 0 <= v < 1, "0 .. 1"),
    "l2": (float, 1e-4, _non_negative, ">= 0"),
    "minibatch": (int, 256, lambda v: v >= 2, ">= 2"),
    "epochs": (int, 10, _non_negative, ">= 0"),
    "validation_every": (int, 50, _positive, ">= 1"),
    # architecture
    "conv1_height": (int, 5, _positive, ">= 1"),
    "conv1_width": (int, 10, _positive, ">= 1"),
    "conv1_channels": (int, 3, _positive, ">= 1"),
    "conv2_height": (int, 10, _positive, ">= 1"),
    "conv2_width": (int, 5, _positive, ">= 1"),
    "conv2_channels": (int, 5, _positive, ">= 1"),
    "hidden": (int, 100, _positive, ">= 1"),
    "batchnorm": (bool, True, lambda v: True, "true/false"),
    "bn_epsilon": (float, 1e-5, _positive, "> 0"),
}

_CROSS_CHECKS = (
    ("word_len_lo", "word_len_hi"),
    ("girth_lo", "girth_hi"),
    ("blot_radius_lo", "blot_radius_hi"),
    ("blot_splash_lo", "blot_splash_hi"),
)


@dataclass
class RunConfig:
    values: dict

    def __getattr__(self, key):
        try:
            return self.values[key]
        except KeyError:
            raise AttributeError(key) from None

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({k: spec[1] for k, spec in _SCHEMA.items()})

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        """Defaults, then the config file, then explicit overrides, then
        the PRINTGUARD_SEED environment variable (which pins both seeds)."""
        cfg = cls.defaults()
        if path is not None:
            cfg._apply(_parse_file(path))
        if overrides:
            cfg._apply({k: str(v) for k, v in overrides.items()})
        env_seed = os.environ.get(ENV_SEED)
        if env_seed is not None:
            cfg._apply({"master_seed": env_seed, "train_seed": env_seed})
        cfg._validate()
        return cfg

    def _apply(self, raw: dict) -> None:
        for key, text in raw.items():
            if key not in _SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            typ = _SCHEMA[key][0]
            try:
                if typ is bool:
                    value = _parse_bool(text) if isinstance(text, str) else bool(text)
                elif typ is int:
                    value = int(str(text), 0)
                else:
                    value = float(text)
            except ValueError:
                raise ConfigError(f"{key}: cannot parse {text!r} as "
                                  f"{typ.__name__}") from None
            self.values[key] = value

    def _validate(self) -> None:
        for key, (typ, _default, check, doc) in _SCHEMA.items():
            v = self.values[key]
            if not check(v):
                raise ConfigError(f"{key} = {v} outside documented range ({doc})")
        for lo_key, hi_key in _CROSS_CHECKS:
            if self.values[lo_key] > self.values[hi_key]:
                raise ConfigError(f"{lo_key} = {self.values[lo_key]} exceeds "
                                  f"{hi_key} = {self.values[hi_key]}")
        if self.values["kerning"] <= -self.values["glyph_scale"] * 5:
            raise ConfigError("kerning collapses the glyph cell")

    def resolved_text(self) -> str:
        lines = ["# printguard run configuration (fully resolved)"]
        for key in _SCHEMA:
            v = self.values[key]
            if isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"

    def echo(self, out_dir) -> None:
        from pathlib import Path

        path = Path(out_dir) / "config.resolved.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.resolved_text())

    # -- views consumed by the owning modules -------------------------------

    def error_config(self) -> ErrorConfig:
        return ErrorConfig(
            girth_lo=self.girth_lo, girth_hi=self.girth_hi,
            line_count_factor=self.line_count_factor,
            angle_std=self.angle_std,
            angle_std_vertical=self.angle_std_vertical,
            len_mean_factor=self.len_mean_factor,
            len_std_factor=self.len_std_factor,
            blot_radius_lo=self.blot_radius_lo,
            blot_radius_hi=self.blot_radius_hi,
            blot_splash_lo=self.blot_splash_lo,
            blot_splash_hi=self.blot_splash_hi,
            blot_rays=self.blot_rays,
            visibility_min_pixels=self.visibility_min_pixels,
            max_attempts=self.max_attempts,
        )

    def generation_config(self, count: int | None = None) -> GenerationConfig:
        kwargs = dict(
            word_len_lo=self.word_len_lo, word_len_hi=self.word_len_hi,
            kerning=self.kerning, margin=self.margin,
            glyph_scale=self.glyph_scale, errors=self.error_config(),
        )
        if count is not None:
            return GenerationConfig.scaled(count, **kwargs)
        return GenerationConfig(composition={
            None: self.count_good,
            ErrorKind.BLOT: self.count_blot,
            ErrorKind.LPE: self.count_lpe,
            ErrorKind.LSE: self.count_lse,
            ErrorKind.LSE_VERTICAL_SOLID: self.count_lse_vertical,
        }, **kwargs)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate, momentum=self.momentum,
            l2=self.l2, minibatch=self.minibatch, epochs=self.epochs,
            validation_every=self.validation_every, seed=self.train_seed,
        )

    def architecture(self) -> Architecture:
        return Architecture(
            conv1_shape=(self.conv1_height, self.conv1_width),
            conv1_channels=self.conv1_channels,
            conv2_shape=(self.conv2_height, self.conv2_width),
            conv2_channels=self.conv2_channels,
            hidden=self.hidden, batchnorm=self.batchnorm,
            epsilon=self.bn_epsilon,
        )


def _parse_file(path) -> dict:
    raw = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                                  f"got {line.rstrip()!r}")
            key, _, value = stripped.partition("=")
            raw[key.strip()] = value.strip()
    return raw
