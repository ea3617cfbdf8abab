"""Run configuration stored as a flat INI file, one section per component."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from comptrack.appearance import AppearanceParams
from comptrack.compensation import CTParams
from comptrack.motio import DataError
from comptrack.tracker import TrackerParams


@dataclass
class KalmanParams:
    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160
    measurement_scale: float = 1.0


@dataclass
class IOParams:
    det_path: str = ""
    frames_dir: str = ""
    out_path: str = ""


@dataclass
class RunParams:
    ct_enabled: bool = True


@dataclass
class RunConfig:
    tracker: TrackerParams = field(default_factory=TrackerParams)
    ct: CTParams = field(default_factory=CTParams)
    kalman: KalmanParams = field(default_factory=KalmanParams)
    appearance: AppearanceParams = field(default_factory=AppearanceParams)
    io: IOParams = field(default_factory=IOParams)
    run: RunParams = field(default_factory=RunParams)

    def sections(self):
        return [(f.name, getattr(self, f.name)) for f in dataclasses.fields(self)]

    def to_ini(self) -> str:
        lines = []
        for name, section in self.sections():
            lines.append(f"[{name}]")
            for f in dataclasses.fields(section):
                lines.append(f"{f.name} = {_format(getattr(section, f.name))}")
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise DataError(f"bad config: {e}") from e
        cfg = cls()
        for sec_name in cp.sections():
            for key, raw in cp[sec_name].items():
                cfg.set(f"{sec_name}.{key}", raw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as f:
                return cls.from_ini(f.read())
        except OSError as e:
            raise DataError(f"cannot read config {path}: {e}") from e

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_ini())

    def set(self, key: str, raw: str) -> None:
        """Assign ``section.key`` (or an unambiguous bare ``key``) from its text form."""
        if "." in key:
            sec_name, name = key.split(".", 1)
            candidates = [(sec_name, getattr(self, sec_name, None))]
            if candidates[0][1] is None:
                raise DataError(f"unknown config section {sec_name!r}")
        else:
            name = key
            candidates = [(s, sec) for s, sec in self.sections()
                          if name in {f.name for f in dataclasses.fields(sec)}]
            if len(candidates) != 1:
                raise DataError(f"config key {key!r} is unknown or ambiguous; use section.key")
        sec_name, section = candidates[0]
        names = {f.name for f in dataclasses.fields(section)}
        if name not in names:
            raise DataError(f"unknown config key {sec_name}.{name}")
        current = getattr(section, name)
        setattr(section, name, _parse(raw, type(current), f"{sec_name}.{name}"))

    def validate(self) -> None:
        try:
            # re-run dataclass checks after assignment
            CTParams(**dataclasses.asdict(self.ct))
        except ValueError as e:
            raise DataError(f"bad config: {e}") from e
        if self.ct.stage == "mc-only":
            self.ct.stage = "mc"


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(raw: str, typ, key: str):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
    except ValueError:
        raise DataError(f"bad value for {key}: {raw!r}") from None
    return raw
