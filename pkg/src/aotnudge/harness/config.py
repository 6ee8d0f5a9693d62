"""
Experiment configuration: a flat key/value mapping read from an INI file.

Every value is kept as text in the canonical mapping and parsed on demand, so
a config round-trips through ``to_ini``/``load_config`` unchanged. Initial
data, forcing and verification checks are small call expressions such as
``single_mode(1, 6)`` or ``final_error_below(1e-9, 'err_x')``, parsed with
:mod:`ast` and never evaluated as Python.
"""

from __future__ import annotations

import ast
import configparser
import io
from dataclasses import dataclass, field
from types import MappingProxyType

from ..errors import ConfigError
from ..euler2d import EulerParams, TaylorGreenSpec, taylor_green
from ..kdv import KdvParams, init_cosines, init_shifted_profile, init_single_mode
from ..lorenz import CouplingVariant, LorenzParams
from ..spectral import SpectralField1D, SpectralVectorField2D

SECTION = "experiment"
SYSTEMS = ("lorenz", "kdv", "kdv_damped", "euler2d")
RESOLUTION_MODES = ("error", "warn", "off")

_COMMON = {
    "name", "system", "description", "T", "T_long", "ref_init", "assim_init",
    "output_stride", "checks", "resolution", "seed", "output_dir", "snapshot_times",
}
_KEYS = {
    "lorenz": _COMMON | {"sigma", "r", "b", "mu", "dt", "variant", "z_offsets"},
    "kdv": _COMMON | {"delta", "gamma", "mu", "M", "N", "dt", "L", "filter_tol", "forcing"},
    "euler2d": _COMMON | {"N", "dt", "mu", "M", "filter_tol", "tg_k", "tg_c", "allow_long", "full_spectrum"},
}
_KEYS["kdv_damped"] = _KEYS["kdv"]

_FLOATS = {"T", "T_long", "sigma", "r", "b", "mu", "dt", "delta", "gamma", "L", "filter_tol", "tg_c"}
_INTS = {"M", "N", "output_stride", "seed", "tg_k"}
_BOOLS = {"allow_long", "full_spectrum"}


def _parse_bool(key, s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {s!r}", key)


def _parse_scalar(key, s):
    try:
        if key in _FLOATS:
            return float(s)
        if key in _INTS:
            f = float(s)
            if f != int(f):
                raise ValueError
            return int(f)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {s!r}", key) from None
    if key in _BOOLS:
        return _parse_bool(key, s)
    return s.strip()


def _parse_float_list(key, s):
    try:
        return tuple(float(x) for x in s.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}: expected a list of numbers, got {s!r}", key) from None


# ---------------------------------------------------------------------------
# call-expression mini language


@dataclass(frozen=True)
class CallSpec:
    """Parsed ``name(arg, ...)`` expression; arguments are literals or nested calls."""

    name: str
    args: tuple = ()


def _convert(node, key):
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.keywords:
            raise ConfigError(f"{key}: only plain calls with positional arguments are allowed", key)
        return CallSpec(node.func.id, tuple(_convert(a, key) for a in node.args))
    if isinstance(node, ast.Name):
        return CallSpec(node.id)
    try:
        return ast.literal_eval(node)
    except ValueError:
        raise ConfigError(f"{key}: unsupported expression {ast.dump(node)}", key) from None


def parse_call(text: str, key: str = "init"):
    """Parse one call expression (or a bare literal such as ``(30, 40, 50)``)."""
    try:
        node = ast.parse(text.strip(), mode="eval").body
    except SyntaxError as e:
        raise ConfigError(f"{key}: cannot parse {text!r} ({e.msg})", key) from None
    return _convert(node, key)


def parse_checks(text: str, key: str = "checks") -> tuple:
    """Semicolon separated list of call expressions."""
    out = []
    for part in text.split(";"):
        if part.strip():
            spec = parse_call(part, key)
            if not isinstance(spec, CallSpec):
                raise ConfigError(f"{key}: {part.strip()!r} is not a check name", key)
            out.append(spec)
    return tuple(out)


def _arity(spec, n, key):
    if len(spec.args) != n:
        raise ConfigError(f"{key}: {spec.name} takes {n} arguments, got {len(spec.args)}", key)


def build_field_1d(spec, N: int, L: float, key: str, ref: SpectralField1D = None) -> SpectralField1D:
    """Turn a parsed init/forcing spec into a 1D field."""
    if not isinstance(spec, CallSpec):
        raise ConfigError(f"{key}: expected an initial-data constructor, got {spec!r}", key)
    try:
        if spec.name == "zero":
            return SpectralField1D.zeros(N, L)
        if spec.name == "ref":
            if ref is None:
                raise ConfigError(f"{key}: 'ref' is only valid for assim_init", key)
            return ref.copy()
        if spec.name == "single_mode":
            _arity(spec, 2, key)
            return init_single_mode(float(spec.args[0]), int(spec.args[1]), N, L)
        if spec.name == "cosines":
            return init_cosines([(int(k), float(a)) for k, a in spec.args], N, L)
        if spec.name == "shifted_profile":
            _arity(spec, 3, key)
            base = build_field_1d(spec.args[0], N, L, key)
            return init_shifted_profile(base, int(spec.args[1]), int(spec.args[2]))
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{key}: {e}", key) from None
    raise ConfigError(f"{key}: unknown 1D constructor {spec.name!r}", key)


def build_field_2d(spec, N: int, key: str, ref: SpectralVectorField2D = None) -> SpectralVectorField2D:
    if not isinstance(spec, CallSpec):
        raise ConfigError(f"{key}: expected an initial-data constructor, got {spec!r}", key)
    if spec.name == "zero":
        return SpectralVectorField2D.zeros(N)
    if spec.name == "ref":
        if ref is None:
            raise ConfigError(f"{key}: 'ref' is only valid for assim_init", key)
        return ref.copy()
    if spec.name == "taylor_green":
        _arity(spec, 2, key)
        return taylor_green(TaylorGreenSpec(int(spec.args[0]), float(spec.args[1])), N)
    raise ConfigError(f"{key}: unknown 2D constructor {spec.name!r}", key)


def build_triple(spec, key: str, ref=None) -> tuple:
    if isinstance(spec, CallSpec):
        if spec.name == "zero":
            return (0.0, 0.0, 0.0)
        if spec.name == "ref" and ref is not None:
            return tuple(ref)
        raise ConfigError(f"{key}: Lorenz initial data must be a literal triple", key)
    try:
        t = tuple(float(x) for x in spec)
    except TypeError:
        raise ConfigError(f"{key}: expected a triple, got {spec!r}", key) from None
    if len(t) != 3:
        raise ConfigError(f"{key}: expected three components, got {len(t)}", key)
    return t


# ---------------------------------------------------------------------------
# the config object


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description backed by a canonical text mapping."""

    values: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    def __post_init__(self):
        object.__setattr__(self, "values", MappingProxyType(dict(self.values)))
        self._validate()

    # -- construction -----------------------------------------------------

    @classmethod
    def from_mapping(cls, mapping) -> "ExperimentConfig":
        return cls({str(k): _to_text(v) for k, v in mapping.items()})

    def with_overrides(self, overrides) -> "ExperimentConfig":
        merged = dict(self.values)
        merged.update({str(k): _to_text(v) for k, v in overrides.items()})
        return ExperimentConfig(merged)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp[SECTION] = dict(self.values)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    # -- accessors ----------------------------------------------------------

    def get(self, key, default=None):
        if key not in self.values:
            return default
        return _parse_scalar(key, self.values[key])

    @property
    def system(self) -> str:
        return self.values["system"]

    @property
    def name(self) -> str:
        return self.values.get("name", "adhoc")

    @property
    def T(self) -> float:
        return self.get("T")

    @property
    def resolution(self) -> str:
        return self.values.get("resolution", "warn")

    @property
    def snapshot_times(self) -> tuple:
        return _parse_float_list("snapshot_times", self.values.get("snapshot_times", ""))

    @property
    def z_offsets(self) -> tuple:
        return _parse_float_list("z_offsets", self.values.get("z_offsets", ""))

    @property
    def checks(self) -> tuple:
        return parse_checks(self.values.get("checks", ""))

    def init_spec(self, key):
        return parse_call(self.values[key], key)

    def lorenz_params(self) -> LorenzParams:
        kw = {k: self.get(k) for k in ("sigma", "r", "b", "mu") if k in self.values}
        return LorenzParams(**kw)

    def variant(self) -> CouplingVariant:
        v = self.values.get("variant", "nudge_xy")
        try:
            return CouplingVariant(v)
        except ValueError:
            names = ", ".join(c.value for c in CouplingVariant)
            raise ConfigError(f"variant: unknown value {v!r}; expected one of {names}", "variant") from None

    def kdv_params(self) -> KdvParams:
        kw = {k: self.get(k) for k in ("delta", "gamma", "mu", "M", "N", "dt", "L", "filter_tol") if k in self.values}
        if "delta" not in kw:
            raise ConfigError("delta is required for KdV runs", "delta")
        return KdvParams(**kw)

    def euler_params(self) -> EulerParams:
        kw = {k: self.get(k) for k in ("N", "dt", "mu", "M", "filter_tol") if k in self.values}
        return EulerParams(**kw)

    # -- validation -----------------------------------------------------------

    def _validate(self):
        v = self.values
        system = v.get("system")
        if system not in SYSTEMS:
            raise ConfigError(f"system must be one of {', '.join(SYSTEMS)}, got {system!r}", "system")
        for key in v:
            if key not in _KEYS[system]:
                raise ConfigError(f"unknown key {key!r} for system {system}", key)
        for key in v:
            self.get(key)
        for key in ("T", "ref_init", "assim_init"):
            if key not in v and not (system == "euler2d" and key == "ref_init" and "tg_k" in v):
                raise ConfigError(f"missing required key {key!r}", key)
        if not self.T > 0:
            raise ConfigError("T must be positive", "T")
        if self.resolution not in RESOLUTION_MODES:
            raise ConfigError(f"resolution must be one of {', '.join(RESOLUTION_MODES)}", "resolution")
        self.snapshot_times
        self.checks
        if system == "lorenz":
            self.lorenz_params()
            self.variant()
            self.z_offsets
            if "dt" in v and not self.get("dt") > 0:
                raise ConfigError("dt must be positive", "dt")
            ref = build_triple(self.init_spec("ref_init"), "ref_init")
            build_triple(self.init_spec("assim_init"), "assim_init", ref)
        elif system in ("kdv", "kdv_damped"):
            p = self.kdv_params()
            ref = build_field_1d(self.init_spec("ref_init"), p.N, p.L, "ref_init")
            build_field_1d(self.init_spec("assim_init"), p.N, p.L, "assim_init", ref)
            if "forcing" in v:
                build_field_1d(parse_call(v["forcing"], "forcing"), p.N, p.L, "forcing")
            if system == "kdv" and (p.gamma != 0 or "forcing" in v):
                raise ConfigError("damping or forcing given for system 'kdv'; use 'kdv_damped'", "system")
        else:
            p = self.euler_params()
            ref = build_field_2d(self.ref_spec_2d(), p.N, "ref_init")
            build_field_2d(self.init_spec("assim_init"), p.N, "assim_init", ref)
            if self.T > 1.0 and not self.get("allow_long", False):
                raise ConfigError("Euler runs beyond T=1 need allow_long = true", "T")

    def ref_spec_2d(self):
        if "ref_init" in self.values:
            return self.init_spec("ref_init")
        return CallSpec("taylor_green", (self.get("tg_k"), self.get("tg_c", 1e-4)))


def _to_text(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_to_text(x) for x in v)
    return str(v)


def load_config(path, overrides=None) -> ExperimentConfig:
    """Read an INI file with an ``[experiment]`` section, applying ``key=value`` overrides."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}", "file") from None
    if SECTION not in cp:
        raise ConfigError(f"{path}: missing [{SECTION}] section", SECTION)
    values = dict(cp[SECTION])
    values.update(overrides or {})
    return ExperimentConfig.from_mapping(values)


def parse_overrides(items) -> dict:
    """``["key=value", ...]`` from the command line."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value", item)
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out
