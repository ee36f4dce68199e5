"""Run configuration: flat INI text with [model], [region], [experiment].

Unknown keys are rejected rather than ignored (a silently misspelled decay
exponent would invalidate every conclusion downstream).  Parsing materializes
all defaults, and serialize/parse round-trips to an identical configuration.
"""

from __future__ import annotations

import configparser
import io
import math
import os
from dataclasses import dataclass, field, fields

from .coefficients import (BSequence, CoefficientModel, anisotropic_orthant_model,
                           delta_model, directional_cones_model, isotropic_model,
                           separable_nd_model, table_model)
from .geometry import RegionPrototype, ball, cube, ellipsoid, polar_star
from .numerics import format_float

COMMANDS = ("scan", "decompose", "limits", "mc", "report")
INNOVATION_NAMES = ("gaussian", "rademacher", "centered-exponential", "shifted-uniform")


class ConfigError(ValueError):
    pass


_MODEL_KEYS = {
    "kind", "beta", "c0", "log_exponent", "zero_sum", "exponents", "delta",
    "rotation", "directions", "b_exponent", "b_scale", "b_prefix", "table",
    "table_path",
}
_REGION_KEYS = {
    "kind", "dimension", "radius", "semi_axes", "star_base", "star_amplitude",
    "star_lobes", "star_directions",
}
_EXPERIMENT_KEYS = {
    "lambda_grid", "rho", "t_rule", "innovation", "replicates", "base_seed",
    "out_dir", "command", "workers",
}


@dataclass(frozen=True)
class RunConfig:
    """Fully materialized run description."""

    model_kind: str
    region_kind: str
    dimension: int
    lambda_grid: tuple[float, ...]
    rho: float = 4.0
    t_rule: str = "log"
    innovation: str = "gaussian"
    replicates: int = 2000
    base_seed: int = 0
    out_dir: str = "out"
    command: str = "report"
    workers: int = 1
    # model parameters (kind-dependent; unused ones stay at defaults)
    beta: float = math.nan
    c0: float = 1.0
    log_exponent: float = 0.0
    zero_sum: bool = False
    exponents: tuple[float, ...] = ()
    cone_delta: float = math.nan
    rotation: float = 0.0
    directions: tuple[tuple[float, float, float], ...] = ()
    b_exponent: float = 3.0
    b_scale: float = 1.0
    b_prefix: tuple[float, ...] = ()
    table_entries: tuple = ()
    table_path: str = ""
    # region parameters
    radius: float = 0.5
    semi_axes: tuple[float, ...] = ()
    star_base: float = 0.35
    star_amplitude: float = 0.1
    star_lobes: int = 5
    star_directions: int = 4096

    def build_prototype(self) -> RegionPrototype:
        if self.region_kind == "cube":
            return cube(self.dimension)
        if self.region_kind == "ball":
            return ball(self.radius, self.dimension)
        if self.region_kind == "ellipsoid":
            return ellipsoid(self.semi_axes or (0.5,) * self.dimension)
        if self.region_kind == "polar-star":
            return polar_star(base=self.star_base, amplitude=self.star_amplitude,
                              lobes=self.star_lobes, n_directions=self.star_directions)
        raise ConfigError(f"region.kind: unknown kind {self.region_kind!r}")

    def build_model(self) -> CoefficientModel:
        kind = self.model_kind
        if kind == "delta":
            return delta_model(self.dimension)
        if kind == "isotropic":
            return isotropic_model(self.beta, self.dimension, self.c0,
                                   self.log_exponent, self.zero_sum)
        if kind == "anisotropic-orthant":
            return anisotropic_orthant_model(self.exponents, self.cone_delta,
                                             self.dimension, self.rotation)
        if kind == "directional-cones":
            angles = [t[0] for t in self.directions]
            deltas = [t[1] for t in self.directions]
            exps = [t[2] for t in self.directions]
            return directional_cones_model(angles, deltas, exps, self.dimension)
        if kind == "separable-nd":
            if self.dimension != 2:
                raise ConfigError("model.kind: separable-nd requires dimension 2")
            return separable_nd_model(
                BSequence(self.b_exponent, self.b_scale, self.b_prefix))
        if kind == "table":
            entries = dict(self.table_entries)
            if self.table_path:
                entries.update(_load_table_csv(self.table_path, self.dimension))
            if not entries:
                raise ConfigError("model.table: table kind needs entries")
            return table_model(entries, self.dimension)
        raise ConfigError(f"model.kind: unknown kind {kind!r}")


def _parse_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: not a number: {raw!r}") from None


def _parse_int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: not an integer: {raw!r}") from None


def _parse_bool(section: str, key: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"{section}.{key}: not a boolean: {raw!r}")


def _parse_floats(section: str, key: str, raw: str) -> tuple[float, ...]:
    return tuple(_parse_float(section, key, tok) for tok in raw.split())


def _load_table_csv(path: str, dimension: int) -> dict:
    entries = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        expected = [f"i{k + 1}" for k in range(dimension)] + ["alpha"]
        if header != expected:
            raise ConfigError(
                f"model.table_path: header must be {','.join(expected)}")
        for line in fh:
            if not line.strip():
                continue
            toks = line.strip().split(",")
            coord = tuple(int(t) for t in toks[:dimension])
            entries[coord] = float(toks[dimension])
    return entries


def parse_config(text: str, base_dir: str | None = None) -> RunConfig:
    """Parse and validate the INI text, materializing every default."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    known = {"model": _MODEL_KEYS, "region": _REGION_KEYS,
             "experiment": _EXPERIMENT_KEYS}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in known[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
    for required in ("model", "region", "experiment"):
        if required not in parser:
            raise ConfigError(f"missing section [{required}]")

    model = parser["model"]
    region = parser["region"]
    experiment = parser["experiment"]

    model_kind = model.get("kind", "").strip()
    if model_kind not in ("delta", "isotropic", "anisotropic-orthant",
                          "directional-cones", "separable-nd", "table"):
        raise ConfigError(f"model.kind: unknown kind {model_kind!r}")
    region_kind = region.get("kind", "").strip()
    if region_kind not in ("cube", "ball", "ellipsoid", "polar-star"):
        raise ConfigError(f"region.kind: unknown kind {region_kind!r}")

    dimension = _parse_int("region", "dimension", region.get("dimension", "2"))
    if dimension < 1:
        raise ConfigError("region.dimension: must be positive")

    if "lambda_grid" not in experiment:
        raise ConfigError("experiment.lambda_grid: required")
    lambda_grid = _parse_floats("experiment", "lambda_grid",
                                experiment["lambda_grid"])
    if len(lambda_grid) == 0:
        raise ConfigError("experiment.lambda_grid: must not be empty")
    if any(b <= a for a, b in zip(lambda_grid, lambda_grid[1:])):
        raise ConfigError("experiment.lambda_grid: must be strictly increasing")
    if any(l < 1.0 for l in lambda_grid):
        raise ConfigError("experiment.lambda_grid: inflation factors must be >= 1")

    rho = _parse_float("experiment", "rho", experiment.get("rho", "4"))
    if rho < 2.0:
        raise ConfigError("experiment.rho: truncation rho must be >= 2")

    t_rule = experiment.get("t_rule", "log").strip()
    if t_rule not in ("log", "sqrt") and not t_rule.startswith("fixed:"):
        raise ConfigError("experiment.t_rule: must be log, sqrt, or fixed:<value>")
    if t_rule.startswith("fixed:"):
        _parse_float("experiment", "t_rule", t_rule.split(":", 1)[1])

    innovation = experiment.get("innovation", "gaussian").strip()
    if innovation not in INNOVATION_NAMES:
        raise ConfigError(
            f"experiment.innovation: unknown innovation {innovation!r}")

    replicates = _parse_int("experiment", "replicates",
                            experiment.get("replicates", "2000"))
    command = experiment.get("command", "report").strip()
    if command not in COMMANDS:
        raise ConfigError(f"experiment.command: unknown command {command!r}")
    if command in ("mc", "report") and replicates < 100:
        raise ConfigError("experiment.replicates: need >= 100 for mc reports")

    base_seed = _parse_int("experiment", "base_seed",
                           experiment.get("base_seed", "0"))
    workers = _parse_int("experiment", "workers", experiment.get("workers", "1"))
    out_dir = experiment.get("out_dir", "out").strip()

    directions = ()
    if "directions" in model:
        triples = []
        for part in model["directions"].split(";"):
            part = part.strip()
            if not part:
                continue
            toks = part.split(":")
            if len(toks) != 3:
                raise ConfigError(
                    "model.directions: expected angle:delta:exponent triples")
            triples.append(tuple(_parse_float("model", "directions", t) for t in toks))
        directions = tuple(triples)

    table_entries = ()
    if "table" in model:
        entries = []
        for part in model["table"].split(";"):
            part = part.strip()
            if not part:
                continue
            toks = part.split()
            if len(toks) != dimension + 1:
                raise ConfigError(
                    f"model.table: each entry needs {dimension} coordinates and a value")
            coord = tuple(_parse_int("model", "table", t) for t in toks[:dimension])
            entries.append((coord, _parse_float("model", "table", toks[dimension])))
        table_entries = tuple(sorted(entries))

    table_path = model.get("table_path", "").strip()
    if table_path and base_dir:
        table_path = os.path.normpath(os.path.join(base_dir, table_path))

    cfg = RunConfig(
        model_kind=model_kind,
        region_kind=region_kind,
        dimension=dimension,
        lambda_grid=lambda_grid,
        rho=rho,
        t_rule=t_rule,
        innovation=innovation,
        replicates=replicates,
        base_seed=base_seed,
        out_dir=out_dir,
        command=command,
        workers=workers,
        beta=_parse_float("model", "beta", model["beta"]) if "beta" in model else math.nan,
        c0=_parse_float("model", "c0", model.get("c0", "1")),
        log_exponent=_parse_float("model", "log_exponent",
                                  model.get("log_exponent", "0")),
        zero_sum=_parse_bool("model", "zero_sum", model.get("zero_sum", "false")),
        exponents=_parse_floats("model", "exponents", model.get("exponents", "")),
        cone_delta=_parse_float("model", "delta", model["delta"]) if "delta" in model else math.nan,
        rotation=_parse_float("model", "rotation", model.get("rotation", "0")),
        directions=directions,
        b_exponent=_parse_float("model", "b_exponent", model.get("b_exponent", "3")),
        b_scale=_parse_float("model", "b_scale", model.get("b_scale", "1")),
        b_prefix=_parse_floats("model", "b_prefix", model.get("b_prefix", "")),
        table_entries=table_entries,
        table_path=table_path,
        radius=_parse_float("region", "radius", region.get("radius", "0.5")),
        semi_axes=_parse_floats("region", "semi_axes", region.get("semi_axes", "")),
        star_base=_parse_float("region", "star_base", region.get("star_base", "0.35")),
        star_amplitude=_parse_float("region", "star_amplitude",
                                    region.get("star_amplitude", "0.1")),
        star_lobes=_parse_int("region", "star_lobes", region.get("star_lobes", "5")),
        star_directions=_parse_int("region", "star_directions",
                                   region.get("star_directions", "4096")),
    )
    # construct both objects once so invalid parameter combinations fail here
    cfg.build_prototype()
    if not (cfg.model_kind == "table" and cfg.table_path):
        cfg.build_model()
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    """Canonical INI text; parse(serialize(cfg)) == cfg."""
    out = io.StringIO()
    out.write("[model]\n")
    out.write(f"kind = {cfg.model_kind}\n")
    if cfg.model_kind == "isotropic":
        out.write(f"beta = {format_float(cfg.beta)}\n")
        out.write(f"c0 = {format_float(cfg.c0)}\n")
        out.write(f"log_exponent = {format_float(cfg.log_exponent)}\n")
        out.write(f"zero_sum = {'true' if cfg.zero_sum else 'false'}\n")
    elif cfg.model_kind == "anisotropic-orthant":
        out.write("exponents = " + " ".join(format_float(v) for v in cfg.exponents) + "\n")
        out.write(f"delta = {format_float(cfg.cone_delta)}\n")
        out.write(f"rotation = {format_float(cfg.rotation)}\n")
    elif cfg.model_kind == "directional-cones":
        trip = "; ".join(
            ":".join(format_float(v) for v in t) for t in cfg.directions)
        out.write(f"directions = {trip}\n")
    elif cfg.model_kind == "separable-nd":
        out.write(f"b_exponent = {format_float(cfg.b_exponent)}\n")
        out.write(f"b_scale = {format_float(cfg.b_scale)}\n")
        if cfg.b_prefix:
            out.write("b_prefix = " + " ".join(format_float(v) for v in cfg.b_prefix) + "\n")
    elif cfg.model_kind == "table":
        if cfg.table_entries:
            ent = "; ".join(
                " ".join(str(c) for c in coord) + " " + format_float(v)
                for coord, v in cfg.table_entries)
            out.write(f"table = {ent}\n")
        if cfg.table_path:
            out.write(f"table_path = {cfg.table_path}\n")
    out.write("\n[region]\n")
    out.write(f"kind = {cfg.region_kind}\n")
    out.write(f"dimension = {cfg.dimension}\n")
    if cfg.region_kind == "ball":
        out.write(f"radius = {format_float(cfg.radius)}\n")
    elif cfg.region_kind == "ellipsoid":
        out.write("semi_axes = " + " ".join(format_float(v) for v in cfg.semi_axes) + "\n")
    elif cfg.region_kind == "polar-star":
        out.write(f"star_base = {format_float(cfg.star_base)}\n")
        out.write(f"star_amplitude = {format_float(cfg.star_amplitude)}\n")
        out.write(f"star_lobes = {cfg.star_lobes}\n")
        out.write(f"star_directions = {cfg.star_directions}\n")
    out.write("\n[experiment]\n")
    out.write("lambda_grid = " + " ".join(format_float(v) for v in cfg.lambda_grid) + "\n")
    out.write(f"rho = {format_float(cfg.rho)}\n")
    out.write(f"t_rule = {cfg.t_rule}\n")
    out.write(f"innovation = {cfg.innovation}\n")
    out.write(f"replicates = {cfg.replicates}\n")
    out.write(f"base_seed = {cfg.base_seed}\n")
    out.write(f"out_dir = {cfg.out_dir}\n")
    out.write(f"command = {cfg.command}\n")
    out.write(f"workers = {cfg.workers}\n")
    return out.getvalue()


def config_as_dict(cfg: RunConfig) -> dict:
    """Flat dict for embedding in output files (deterministic field order)."""
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = list(v) if not (v and isinstance(v[0], tuple)) else [list(t) for t in v]
        if isinstance(v, float) and math.isnan(v):
            v = None
        out[f.name] = v
    return out
