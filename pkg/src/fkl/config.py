"""INI-style run configuration, validated before any compute starts."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .grid import Grid
from .ground_state import BaseParams, SolverOptions
from .kirchhoff import KirchhoffParams
from .potentials import PotentialSpec, check_potential

# every recognised key, with its parser; unknown keys are rejected
_FLOAT, _INT, _STR, _FLIST = float, int, str, "floats"

SCHEMA = {
    "model": {"a": _FLOAT, "b": _FLOAT, "m": _FLOAT, "s": _FLOAT, "p": _FLOAT, "dim": _INT},
    "grid": {"half_width": _FLOAT, "points": _INT},
    "solver": {"tol": _FLOAT, "petviashvili_tol": _FLOAT, "petviashvili_max_iter": _INT,
               "newton_tol": _FLOAT, "newton_max_iter": _INT},
    "scale": {"b_list": _FLIST},
    "spectrum": {"kind": _STR, "sector": _STR, "k": _INT, "method": _STR, "dump_fields": _STR},
    "potential": {"kind": _STR, "x0": _FLIST, "base": _FLOAT, "height": _FLOAT,
                  "width": _FLOAT, "tilt": _FLOAT, "exponent": _FLOAT, "alpha": _FLOAT,
                  "r0": _FLOAT, "table_x": _FLIST, "table_v": _FLIST},
    "semiclassical": {"eps": _FLOAT, "eps_list": _FLIST, "dx": _FLOAT, "delta": _FLOAT},
    "output": {"dir": _STR},
}

DEFAULTS = {
    "model": {"a": 1.0, "b": 0.0, "m": 1.0, "s": 0.5, "p": 2.0, "dim": 1},
    "grid": {},
    "solver": {},
    "scale": {},
    "spectrum": {"kind": "Lplus", "sector": "full", "k": 6, "method": "lanczos",
                 "dump_fields": "no"},
    "potential": {},
    "semiclassical": {},
    "output": {"dir": "fkl-out"},
}


def _parse_value(section, key, raw, kind):
    try:
        if kind == _FLIST:
            return tuple(float(t) for t in raw.replace(",", " ").split())
        return kind(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


@dataclass
class Config:
    sections: dict
    source: Optional[str] = None
    model: KirchhoffParams = field(init=False)
    grid: Grid = field(init=False)
    solver: SolverOptions = field(init=False)

    def __post_init__(self):
        self.validate()

    # -- loading --------------------------------------------------------------
    @classmethod
    def from_string(cls, text: str, source: Optional[str] = None) -> "Config":
        cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
        try:
            cp.read_string(text, source=source or "<config>")
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        sections = {}
        for name in cp.sections():
            if name not in SCHEMA:
                raise ConfigError(f"unknown section [{name}]")
            vals = {}
            for key, raw in cp.items(name):
                if key not in SCHEMA[name]:
                    raise ConfigError(f"unknown key {key!r} in [{name}]")
                vals[key] = _parse_value(name, key, raw.strip(), SCHEMA[name][key])
            sections[name] = vals
        merged = {}
        for name, defaults in DEFAULTS.items():
            merged[name] = {**defaults, **sections.get(name, {})}
        return cls(merged, source)

    @classmethod
    def from_file(cls, path) -> "Config":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_string(text, str(path))

    # -- validation ----------------------------------------------------------
    def validate(self):
        m = self.sections["model"]
        base = BaseParams(m["s"], m["p"], m["dim"])
        self.model = KirchhoffParams(m["a"], m["b"], m["m"], base)
        g = self.sections["grid"]
        L = g.get("half_width", 200.0 if base.dim == 1 else 40.0)
        n = g.get("points", 8192 if base.dim == 1 else 256)
        self.grid = Grid(base.dim, L, n)
        if not L > 10.0:
            raise ConfigError("[grid] half_width must exceed 10 so the decay window [5, L/2] is nonempty")
        sv = self.sections["solver"]
        self.solver = SolverOptions(**sv)
        for b in self.sections["scale"].get("b_list", ()):
            if b < 0:
                raise ConfigError("[scale] b_list entries must be >= 0")
        sp = self.sections["spectrum"]
        if sp["kind"] not in ("Tplus", "Lplus"):
            raise ConfigError("[spectrum] kind must be Tplus or Lplus")
        if sp["sector"] not in ("full", "even", "odd"):
            raise ConfigError("[spectrum] sector must be full, even or odd")
        if not 1 <= sp["k"] <= 40:
            raise ConfigError("[spectrum] k must lie in [1, 40]")
        if sp["method"] not in ("lanczos", "dense"):
            raise ConfigError("[spectrum] method must be lanczos or dense")
        if self.sections["potential"]:
            pot = self.potential()
            check_potential(pot, base.dim, base.s)
            sc = self.sections["semiclassical"]
            for e in (sc.get("eps"),) + tuple(sc.get("eps_list", ())):
                if e is not None and not e > 0:
                    raise ConfigError("[semiclassical] eps values must be positive")
            if "dx" in sc and not sc["dx"] > 0:
                raise ConfigError("[semiclassical] dx must be positive")
            if "delta" in sc and not 0 < sc["delta"] < pot.radius:
                raise ConfigError("[semiclassical] delta must lie in (0, r0)")

    def potential(self) -> PotentialSpec:
        p = dict(self.sections["potential"])
        if not p:
            raise ConfigError("missing [potential] section")
        p.setdefault("x0", (0.0,) * self.grid.dim)
        return PotentialSpec(**p)

    def semiclassical_model(self) -> KirchhoffParams:
        """Model with m replaced by V(x0)."""
        return self.model.with_m(self.potential().value_at_x0)

    def section(self, *names) -> dict:
        return {n: self.sections[n] for n in names}
