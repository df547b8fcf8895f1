"""Experiment configuration: strict JSON parsing, defaults and feasibility."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Dict, List, Optional, Union

from .errors import ConfigInvalid, ConfigSyntax, InvalidField, ResolutionTooCoarse
from .fields import GridSpec
from .flow import SCHEMES, SchemeConfig
from .skeleton import PAIR_POLICIES, build_skeleton, calibrate_width

POINT_KINDS = ("halton", "lattice", "explicit")


@dataclass(frozen=True)
class ExperimentConfig:
    i_list: List[int]
    n: Union[int, Dict[int, int]]
    t_end: float = 1.0
    t_star: float = 0.2
    t_min: float = 1e-3
    scheme: str = "imex"
    cfl: float = 0.5
    imex_dt: Optional[float] = None
    max_principle_guard: bool = True
    stencil_radius: int = 2
    points_kind: str = "halton"
    points_count: int = 64
    points: Optional[List[List[float]]] = None
    seed: int = 7
    pair_policy: str = "all_pairs"
    deficit_exponent: float = 1.0
    output_dir: str = "out"
    emit_snapshots: bool = False
    jobs: int = 1

    def n_for(self, i: int) -> int:
        return self.n[i] if isinstance(self.n, dict) else self.n

    def scheme_config(self) -> SchemeConfig:
        return SchemeConfig(self.scheme, self.cfl, self.imex_dt, self.max_principle_guard)

    def deficit(self, i: int) -> float:
        """Area deficit allowed at order ``i``: ``i ** -deficit_exponent``."""
        return float(i) ** (-self.deficit_exponent)


REQUIRED = ("i_list", "n")
_FIELDS = {f.name for f in fields(ExperimentConfig)}


def _bad(name, msg):
    raise ConfigInvalid(f"{name}: {msg}")


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x):
    return (isinstance(x, (int, float)) and not isinstance(x, bool)) and math.isfinite(x)


def validate(cfg: ExperimentConfig, check_feasibility: bool = True) -> ExperimentConfig:
    if not isinstance(cfg.i_list, list) or not cfg.i_list:
        _bad("i_list", "must be a non-empty list of integers")
    for i in cfg.i_list:
        if not _is_int(i) or i < 1:
            _bad("i_list", f"lattice orders must be integers >= 1, got {i!r}")
    if len(set(cfg.i_list)) != len(cfg.i_list):
        _bad("i_list", "duplicate lattice order")
    for i in cfg.i_list:
        n = cfg.n_for(i) if not isinstance(cfg.n, dict) or i in cfg.n else None
        if n is None:
            _bad("n", f"no grid resolution given for i={i}")
        if not _is_int(n):
            _bad("n", f"must be an integer, got {n!r}")
        try:
            GridSpec(n)
        except InvalidField as exc:
            _bad("n", str(exc))
    for name in ("t_end", "t_star", "t_min", "cfl", "deficit_exponent"):
        val = getattr(cfg, name)
        if not _is_num(val) or val <= 0:
            _bad(name, f"must be a positive number, got {val!r}")
    if cfg.t_star > cfg.t_end:
        _bad("t_star", f"{cfg.t_star} exceeds t_end={cfg.t_end}")
    if cfg.t_min > cfg.t_end:
        _bad("t_min", f"{cfg.t_min} exceeds t_end={cfg.t_end}")
    if cfg.cfl > 1:
        _bad("cfl", f"must lie in (0, 1], got {cfg.cfl}")
    if cfg.imex_dt is not None and (not _is_num(cfg.imex_dt) or cfg.imex_dt <= 0):
        _bad("imex_dt", f"must be a positive number or null, got {cfg.imex_dt!r}")
    if cfg.scheme not in SCHEMES:
        _bad("scheme", f"must be one of {SCHEMES}, got {cfg.scheme!r}")
    if cfg.stencil_radius not in (1, 2, 3) or not _is_int(cfg.stencil_radius):
        _bad("stencil_radius", f"must be 1, 2 or 3, got {cfg.stencil_radius!r}")
    if cfg.points_kind not in POINT_KINDS:
        _bad("points_kind", f"must be one of {POINT_KINDS}, got {cfg.points_kind!r}")
    if cfg.points_kind == "explicit":
        if not cfg.points or len(cfg.points) < 2:
            _bad("points", "explicit point sets need at least 2 points")
        for p in cfg.points:
            if not (isinstance(p, list) and len(p) == 2 and all(_is_num(c) for c in p)):
                _bad("points", f"each point must be [x, y], got {p!r}")
    elif not _is_int(cfg.points_count) or cfg.points_count < 2:
        _bad("points_count", f"must be an integer >= 2, got {cfg.points_count!r}")
    if not _is_int(cfg.seed):
        _bad("seed", f"must be an integer, got {cfg.seed!r}")
    if cfg.pair_policy not in PAIR_POLICIES:
        _bad("pair_policy", f"must be one of {PAIR_POLICIES}, got {cfg.pair_policy!r}")
    for name in ("max_principle_guard", "emit_snapshots"):
        if not isinstance(getattr(cfg, name), bool):
            _bad(name, "must be true or false")
    if not isinstance(cfg.output_dir, str) or not cfg.output_dir:
        _bad("output_dir", "must be a non-empty string")
    if not _is_int(cfg.jobs) or cfg.jobs < 1:
        _bad("jobs", f"must be an integer >= 1, got {cfg.jobs!r}")
    if check_feasibility:
        check_resolvable(cfg)
    return cfg


def check_resolvable(cfg: ExperimentConfig) -> None:
    """Dry-run the tube calibration for every ``(i, n)`` pair."""
    for i in cfg.i_list:
        n = cfg.n_for(i)
        try:
            calibrate_width(GridSpec(n), i, build_skeleton(i, cfg.pair_policy), deficit=cfg.deficit(i))
        except ResolutionTooCoarse as exc:
            raise ConfigInvalid(f"n: {exc}") from exc


def from_dict(data: dict, check_feasibility: bool = True) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigInvalid("config must be a JSON object")
    unknown = sorted(set(data) - _FIELDS)
    if unknown:
        raise ConfigInvalid(f"{unknown[0]}: unknown config key")
    missing = [k for k in REQUIRED if k not in data]
    if missing:
        raise ConfigInvalid(f"{missing[0]}: required key is missing")
    data = dict(data)
    if isinstance(data["n"], dict):
        try:
            data["n"] = {int(k): v for k, v in data["n"].items()}
        except ValueError:
            raise ConfigInvalid("n: map keys must be lattice orders") from None
    return validate(ExperimentConfig(**data), check_feasibility)


def parse_config(text: str, check_feasibility: bool = True) -> ExperimentConfig:
    """Parse and validate JSON config text, filling documented defaults."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSyntax(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return from_dict(data, check_feasibility)


def to_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    if isinstance(cfg.n, dict):
        d["n"] = {str(k): v for k, v in sorted(cfg.n.items())}
    return d


def serialize_config(cfg: ExperimentConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n"


def override(cfg: ExperimentConfig, check_feasibility: bool = True, **changes) -> ExperimentConfig:
    """Copy of ``cfg`` with the non-None ``changes`` applied and re-validated."""
    changes = {k: v for k, v in changes.items() if v is not None}
    return validate(replace(cfg, **changes), check_feasibility)
