"""INI-style backbone configuration files.

Sections [stem], [stage1]..[stage4], [head]. Stage keys: depth, dim,
exp_ratio, attention, spanning, window, drop_path. Stem takes an optional
width, head takes classes. exp_ratio values are exact rationals: '5/2' and
'2.5' both parse to Fraction(5, 2) and emit as '5/2', so parse(emit(c))
round-trips identically. Unknown sections or keys are rejected with an
error naming the offender.
"""

from __future__ import annotations

import configparser
from fractions import Fraction

from .backbone import BackboneConfig, StageConfig

_STAGE_KEYS = ("depth", "dim", "exp_ratio", "attention", "spanning", "window", "drop_path")
_STAGE_SECTIONS = ("stage1", "stage2", "stage3", "stage4")
_SECTIONS = ("stem",) + _STAGE_SECTIONS + ("head",)


class ConfigError(ValueError):
    def __init__(self, section: str | None, key: str | None, message: str):
        self.section = section
        self.key = key
        self.message = message
        where = ""
        if section is not None:
            where = f"[{section}] "
            if key is not None:
                where = f"[{section}] {key}: "
        super().__init__(f"{where}{message}")


def _parse_int(section, key, raw, minimum=None):
    try:
        value = int(raw, 10)
    except ValueError:
        raise ConfigError(section, key, f"expected an integer, got {raw!r}") from None
    if minimum is not None and value < minimum:
        raise ConfigError(section, key, f"must be >= {minimum}, got {value}")
    return value


def _parse_bool(section, key, raw):
    lowered = raw.strip().lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    raise ConfigError(section, key, f"expected true or false, got {raw!r}")


def _parse_ratio(section, key, raw):
    try:
        value = Fraction(raw.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(section, key, f"expected a rational like 5/2 or 2.5, got {raw!r}") from None
    if value < 1:
        raise ConfigError(section, key, f"must be >= 1, got {raw}")
    return value


def _parse_float(section, key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(section, key, f"expected a number, got {raw!r}") from None


def _parse_window(section, key, raw):
    if raw.strip().lower() == "full":
        return None
    return _parse_int(section, key, raw, minimum=1)


def parse_config(text: str) -> BackboneConfig:
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str  # keep key case so unknown-key reports are literal
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(None, None, f"malformed config: {exc}") from None

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(section, None, "unknown section")
    for section in _SECTIONS:
        if section not in parser:
            raise ConfigError(section, None, "missing section")

    for key in parser["stem"]:
        if key != "width":
            raise ConfigError("stem", key, "unknown key")
    for key in parser["head"]:
        if key != "classes":
            raise ConfigError("head", key, "unknown key")

    stages = []
    for section in _STAGE_SECTIONS:
        entries = parser[section]
        for key in entries:
            if key not in _STAGE_KEYS:
                raise ConfigError(section, key, "unknown key")
        for key in _STAGE_KEYS:
            if key not in entries:
                raise ConfigError(section, key, "missing key")
        drop = _parse_float(section, "drop_path", entries["drop_path"])
        if not 0.0 <= drop < 1.0:
            raise ConfigError(section, "drop_path", f"must be in [0, 1), got {drop}")
        stages.append(StageConfig(
            depth=_parse_int(section, "depth", entries["depth"], minimum=1),
            dim=_parse_int(section, "dim", entries["dim"], minimum=1),
            ratio=_parse_ratio(section, "exp_ratio", entries["exp_ratio"]),
            attention=_parse_bool(section, "attention", entries["attention"]),
            spanning=_parse_bool(section, "spanning", entries["spanning"]),
            window=_parse_window(section, "window", entries["window"]),
            drop_path=drop,
        ))

    stem_width = None
    if "width" in parser["stem"]:
        stem_width = _parse_int("stem", "width", parser["stem"]["width"], minimum=1)
    if "classes" not in parser["head"]:
        raise ConfigError("head", "classes", "missing key")
    classes = _parse_int("head", "classes", parser["head"]["classes"], minimum=2)

    config = BackboneConfig(stages=tuple(stages), classes=classes, stem_width=stem_width)
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(None, None, str(exc)) from None
    return config


def emit_config(config: BackboneConfig) -> str:
    config.validate()
    lines = ["[stem]"]
    if config.stem_width is not None:
        lines.append(f"width = {config.stem_width}")
    for i, stage in enumerate(config.stages, 1):
        lines.append("")
        lines.append(f"[stage{i}]")
        lines.append(f"depth = {stage.depth}")
        lines.append(f"dim = {stage.dim}")
        lines.append(f"exp_ratio = {stage.ratio}")
        lines.append(f"attention = {'true' if stage.attention else 'false'}")
        lines.append(f"spanning = {'true' if stage.spanning else 'false'}")
        lines.append(f"window = {'full' if stage.window is None else stage.window}")
        lines.append(f"drop_path = {stage.drop_path!r}")
    lines.append("")
    lines.append("[head]")
    lines.append(f"classes = {config.classes}")
    lines.append("")
    return "\n".join(lines)


def load_config(path) -> BackboneConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(path, config: BackboneConfig):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(emit_config(config))
