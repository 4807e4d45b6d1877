"""Run configuration: TOML file plus command-line overrides."""
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .kepler import CurvedSpace
from .reduction import MassPair

_FORMATS = ("csv", "json")


@dataclass
class RunConfig:
    raw: dict
    digest: str
    out_dir: Path = Path("out")
    fmt: str = "csv"
    svg: bool = False
    timestamp: bool = True
    tol: float = 1e-12

    @classmethod
    def from_path(cls, path):
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_bytes()
        try:
            raw = tomllib.loads(text.decode())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
        digest = hashlib.sha256(text).hexdigest()[:16]
        cfg = cls(raw=raw, digest=digest)
        out = raw.get("output", {})
        cfg.out_dir = Path(out.get("dir", "out"))
        cfg.fmt = out.get("format", "csv")
        cfg.svg = bool(out.get("svg", False))
        cfg.timestamp = bool(out.get("timestamp", True))
        cfg.tol = float(raw.get("run", {}).get("tol", 1e-12))
        cfg.validate()
        return cfg

    def apply_overrides(self, args):
        if getattr(args, "out", None):
            self.out_dir = Path(args.out)
        if getattr(args, "tol", None) is not None:
            self.tol = args.tol
        if getattr(args, "format", None):
            self.fmt = args.format
        if getattr(args, "svg", False):
            self.svg = True
        if getattr(args, "no_timestamp", False):
            self.timestamp = False
        if getattr(args, "flat_limit", False):
            self.raw.setdefault("space", {})["sign"] = 1
            self.raw["space"]["rho"] = 1e6
        self.validate()
        return self

    def validate(self):
        if self.fmt not in _FORMATS:
            raise ConfigError(f"format must be one of {_FORMATS}, got {self.fmt!r}")
        if not (1e-14 <= self.tol <= 1e-3):
            raise ConfigError(f"tol must lie in [1e-14, 1e-3], got {self.tol}")
        # constructing the typed objects runs every physical validation
        self.space
        self.masses

    # --- typed sections ---

    @property
    def space(self):
        sec = self.raw.get("space", {})
        try:
            return CurvedSpace(int(sec.get("sign", 1)), float(sec.get("rho", 1.0)))
        except Exception as exc:
            raise ConfigError(f"bad [space] section: {exc}") from exc

    @property
    def masses(self):
        sec = self.raw.get("masses", {})
        try:
            return MassPair(float(sec.get("m1", 0.5)), float(sec.get("m2", 0.5)))
        except Exception as exc:
            raise ConfigError(f"bad [masses] section: {exc}") from exc

    def section(self, name):
        return dict(self.raw.get(name, {}))

    def state_value(self, key, default=None):
        sec = self.raw.get("state", {})
        if key not in sec and default is None:
            raise ConfigError(f"missing [state] value {key!r}")
        return float(sec.get(key, default))
