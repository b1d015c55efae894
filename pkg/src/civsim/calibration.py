"""Latency calibration: per-component durations that drive the simulated clock.

The calibration is a flat mapping of dotted parameter names to milliseconds,
stored on disk as nested JSON with a schema header::

    {"schema": "civsim.calibration/1",
     "call_setup_ms": {"voip-sip": {"voip-sip": 3050.0, ...}, ...},
     "dtmf": {"digital-event": {"overhead_ms": 80.0, "per_digit_ms": 12.0}, ...},
     ...}

Analogue DTMF ``per_digit_ms`` is paid on top of mark + space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .core import PROFILES, CivError, NetworkKind
from .dtmf import PathCost, PathKind

SCHEMA = "civsim.calibration/1"

KINDS = tuple(k.value for k in NetworkKind)
PATHS = tuple(p.value for p in PathKind)

PARAMETERS = (
    tuple(f"call_setup_ms.{o}.{d}" for o in KINDS for d in KINDS)
    + ("answer_ms", "resume_ms")
    + tuple(f"dtmf.{p}.{part}" for p in PATHS for part in ("overhead_ms", "per_digit_ms"))
    + tuple(f"recognition_ms.{name}" for name in PROFILES)
    + ("gateway_conversion_ms", "cnam_lookup_ms")
)


class ConfigError(CivError, ValueError):
    """Malformed or inconsistent input file; ``where`` names the file/field."""

    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


def _flatten(tree: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def _nest(flat: dict) -> dict:
    tree: dict = {}
    for name, value in flat.items():
        node = tree
        parts = _split(name)
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return tree


def _split(name: str) -> list[str]:
    # keys like "dtmf.analogue-inband.per_digit_ms"; no key contains a dot itself
    return name.split(".")


@dataclass(frozen=True)
class LatencyCalibration:
    values: dict = field(default_factory=dict)
    noise_snr_db: float = math.inf
    setup_jitter: float = 0.0

    def __post_init__(self):
        missing = [p for p in PARAMETERS if p not in self.values]
        if missing:
            raise ConfigError(f"missing parameters {missing}", "calibration")
        unknown = [p for p in self.values if p not in PARAMETERS]
        if unknown:
            raise ConfigError(f"unknown parameters {unknown}", "calibration")
        for name, value in self.values.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
                raise ConfigError(f"not a finite number: {value!r}", f"calibration.{name}")
            if value < 0:
                raise ConfigError(f"durations must be >= 0, got {value}", f"calibration.{name}")
        if not 0.0 <= self.setup_jitter < 1.0:
            raise ConfigError("setup_jitter must be in [0, 1)", "calibration.setup_jitter")
        # hot path lookup keyed by enum members
        setup = {(o, d): self.values[f"call_setup_ms.{o.value}.{d.value}"] for o in NetworkKind for d in NetworkKind}
        object.__setattr__(self, "_setup", setup)

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def call_setup(self, origin: NetworkKind, dest: NetworkKind) -> float:
        try:
            return self._setup[(origin, dest)]
        except KeyError:
            return self.values[f"call_setup_ms.{NetworkKind(origin).value}.{NetworkKind(dest).value}"]

    def path_cost(self, path: PathKind) -> PathCost:
        p = PathKind(path).value
        return PathCost(self.values[f"dtmf.{p}.overhead_ms"], self.values[f"dtmf.{p}.per_digit_ms"])

    def recognition(self, profile_name: str) -> float:
        return self.values[f"recognition_ms.{profile_name}"]

    @property
    def answer_ms(self) -> float:
        return self.values["answer_ms"]

    @property
    def resume_ms(self) -> float:
        return self.values["resume_ms"]

    @property
    def gateway_ms(self) -> float:
        return self.values["gateway_conversion_ms"]

    @property
    def cnam_ms(self) -> float:
        return self.values["cnam_lookup_ms"]

    def with_values(self, **updates) -> LatencyCalibration:
        values = dict(self.values)
        for key, value in updates.items():
            values[key] = value
        return replace(self, values=values)

    def updated(self, mapping: dict) -> LatencyCalibration:
        values = dict(self.values)
        values.update(mapping)
        return replace(self, values=values)

    @classmethod
    def uniform(cls, value: float = 0.0, **kw) -> LatencyCalibration:
        return cls({p: float(value) for p in PARAMETERS}, **kw)

    def to_dict(self) -> dict:
        doc = {"schema": SCHEMA}
        doc.update(_nest({p: float(self.values[p]) for p in PARAMETERS}))
        doc["noise_snr_db"] = None if math.isinf(self.noise_snr_db) else float(self.noise_snr_db)
        doc["setup_jitter"] = float(self.setup_jitter)
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_dict(cls, doc: dict, where: str = "calibration") -> LatencyCalibration:
        if not isinstance(doc, dict):
            raise ConfigError("top level must be an object", where)
        if doc.get("schema") != SCHEMA:
            raise ConfigError(f"expected schema {SCHEMA!r}, got {doc.get('schema')!r}", f"{where}.schema")
        body = {k: v for k, v in doc.items() if k not in ("schema", "noise_snr_db", "setup_jitter")}
        snr = doc.get("noise_snr_db")
        try:
            return cls(
                _flatten(body),
                noise_snr_db=math.inf if snr is None else float(snr),
                setup_jitter=float(doc.get("setup_jitter", 0.0)),
            )
        except ConfigError as exc:
            raise ConfigError(str(exc).split(": ", 1)[-1], f"{where}:{exc.where}") from None

    @classmethod
    def load(cls, path) -> LatencyCalibration:
        return cls.from_dict(load_json(path), str(path))


def load_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read: {exc.strerror}", str(path)) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from None


def data_path(name: str) -> Path:
    return Path(str(resources.files("civsim") / "data" / name))


def default_calibration() -> LatencyCalibration:
    return LatencyCalibration.load(data_path("calibration.json"))
