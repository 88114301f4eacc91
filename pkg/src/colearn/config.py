"""Experiment configuration and its flat ``key = value`` file format.

Values may be plain numbers or short arithmetic in ``pi`` (``-3*pi/2``).
Pairs are comma separated (``x_init = -pi, 0``). ``#`` starts a comment.
"""
from __future__ import annotations

import ast
import configparser
import math
import operator
from dataclasses import dataclass, field, replace

from .cleaning import CleanConfig
from .datagen import GenConfig
from .planner import PlannerConfig

_SECTION = "colearn"

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def eval_number(text: str) -> float:
    """Evaluate a numeric literal or simple expression in ``pi``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ValueError(f"unsupported expression: {text!r}")

    return ev(ast.parse(text.strip(), mode="eval"))


@dataclass(frozen=True)
class SurrogateConfig:
    k: int = 3
    validity_percentile: float = 99.5
    validity_scale: float = 1.5


@dataclass(frozen=True)
class ExperimentConfig:
    n_epochs: int = 10
    runs_per_epoch: int = 300
    held_out_fraction: float = 0.05
    seed: int = 0
    gen: GenConfig = field(default_factory=GenConfig)
    clean: CleanConfig = field(default_factory=CleanConfig)
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)

    def __post_init__(self):
        if self.n_epochs < 1 or self.runs_per_epoch < 0:
            raise ValueError("need n_epochs >= 1 and runs_per_epoch >= 0")
        if not 0 <= self.held_out_fraction < 1:
            raise ValueError("held_out_fraction must lie in [0, 1)")


# flat key -> (sub-config, field name); None means ExperimentConfig itself
_KEYS = {
    "n_epochs": (None, "n_epochs"),
    "runs_per_epoch": (None, "runs_per_epoch"),
    "held_out_fraction": (None, "held_out_fraction"),
    "seed": (None, "seed"),
    "n_sims": ("gen", "n_sims"),
    "dt": ("gen", "dt"),
    "cost_cap": ("gen", "cost_cap"),
    "state_cap": ("gen", "state_cap"),
    "theta_range": ("gen", "theta_range"),
    "omega_range": ("gen", "omega_range"),
    "phi_range": ("gen", "phi_range"),
    "w": ("gen", "w"),
    "harvest_stride": ("gen", "harvest_stride"),
    "d": ("clean", "d"),
    "k_max": ("clean", "k_max"),
    "exhaustive": ("clean", "exhaustive"),
    "k": ("surrogate", "k"),
    "validity_percentile": ("surrogate", "validity_percentile"),
    "validity_scale": ("surrogate", "validity_scale"),
    "x_init": ("planner", "x_init"),
    "x_goal": ("planner", "x_goal"),
    "goal_radius": ("planner", "goal_radius"),
    "goal_bias": ("planner", "goal_bias"),
    "sigma": ("planner", "sigma"),
    "sigma_goal": ("planner", "sigma_goal"),
    "max_nodes": ("planner", "max_nodes"),
    "max_iterations": ("planner", "max_iterations"),
    "quantum": ("planner", "quantum"),
}
_INT_FIELDS = {"n_epochs", "runs_per_epoch", "seed", "n_sims", "harvest_stride", "k_max", "k",
               "max_nodes", "max_iterations"}
_PAIR_FIELDS = {"theta_range", "omega_range", "phi_range", "x_init", "x_goal"}


def _parse_value(key: str, raw: str):
    if key == "exhaustive":
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if key in _PAIR_FIELDS:
        parts = [eval_number(p) for p in raw.split(",")]
        if len(parts) != 2:
            raise ValueError(f"{key} needs two comma-separated values, got {raw!r}")
        return tuple(float(p) for p in parts)
    value = eval_number(raw)
    if key in _INT_FIELDS:
        if value != int(value):
            raise ValueError(f"{key} must be an integer, got {raw!r}")
        return int(value)
    return float(value)


def config_from_mapping(values: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    base = ExperimentConfig() if base is None else base
    top, subs = {}, {"gen": {}, "clean": {}, "surrogate": {}, "planner": {}}
    for key, raw in values.items():
        if key not in _KEYS:
            raise KeyError(f"unknown config key {key!r}")
        where, name = _KEYS[key]
        value = _parse_value(key, raw) if isinstance(raw, str) else raw
        (top if where is None else subs[where])[name] = value
    # dynamics settings are shared between generation and planning
    if "dt" in subs["gen"]:
        subs["planner"]["dt"] = subs["gen"]["dt"]
    if "w" in subs["gen"]:
        subs["planner"]["w"] = subs["gen"]["w"]
    return replace(
        base,
        **top,
        gen=replace(base.gen, **subs["gen"]),
        clean=replace(base.clean, **subs["clean"]),
        surrogate=replace(base.surrogate, **subs["surrogate"]),
        planner=replace(base.planner, **subs["planner"]),
    )


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    with open(path) as fh:
        parser.read_string(f"[{_SECTION}]\n" + fh.read())
    return config_from_mapping(dict(parser[_SECTION]))


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for key, (where, name) in _KEYS.items():
        obj = cfg if where is None else getattr(cfg, where)
        lines.append(f"{key} = {_fmt(getattr(obj, name))}")
    return "\n".join(lines) + "\n"
