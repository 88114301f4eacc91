"""Learning-based kinodynamic RRT.

Each iteration samples a target (the goal with probability ``goal_bias``),
picks the tree node with the lowest predicted cost-to-go among nodes whose
query is supported by the data, asks the steering model for costate and
duration, perturbs and quantises them, and integrates from the node. The
new node is wherever the integration ends, not the target itself.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import truncnorm

from .datagen import SteeringParams
from .dynamics import IntegrationDiverged, State, integrate
from .surrogate import SurrogateModel


@dataclass(frozen=True)
class PlannerConfig:
    x_init: tuple[float, float] = (-math.pi, 0.0)
    x_goal: tuple[float, float] = (0.0, 0.0)
    goal_radius: float = 0.15
    goal_bias: float = 0.1
    sigma: float = math.pi / 4
    sigma_goal: float = math.pi / 2
    max_nodes: int = 2000
    max_iterations: int = 50000
    quantum: float = 0.01
    theta_bounds: tuple[float, float] = (-1.5 * math.pi, 0.5 * math.pi)
    omega_bounds: tuple[float, float] = (-math.pi, math.pi)
    dt: float = 0.01
    w: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.goal_bias <= 1:
            raise ValueError(f"goal_bias must lie in [0, 1], got {self.goal_bias}")
        if not (self.goal_radius > 0 and self.quantum > 0):
            raise ValueError("goal_radius and quantum must be positive")
        if not (self.sigma > 0 and self.sigma_goal > 0):
            raise ValueError("sigma and sigma_goal must be positive")
        if self.max_nodes < 1 or self.max_iterations < 0:
            raise ValueError("bad node/iteration budget")

    def in_bounds(self, x) -> bool:
        return (self.theta_bounds[0] <= x[0] <= self.theta_bounds[1]
                and self.omega_bounds[0] <= x[1] <= self.omega_bounds[1])


@dataclass
class TreeNode:
    state: State
    parent: int | None = None
    edge_params: SteeringParams | None = None
    edge_cost: float = 0.0
    cost_to_come: float = 0.0
    # target sampled when this node was created and the predicted cost used to pick its parent
    target: State | None = None
    predicted_cost: float | None = None


class Tree:
    """Flat array of nodes; node ids are list positions."""

    def __init__(self, root, capacity: int = 1024):
        self.nodes: list[TreeNode] = [TreeNode(State(float(root[0]), float(root[1])))]
        self._states = np.empty((max(capacity, 1), 2))
        self._states[0] = root

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, i: int) -> TreeNode:
        return self.nodes[i]

    @property
    def states(self) -> np.ndarray:
        return self._states[: len(self.nodes)]

    def add(self, node: TreeNode) -> int:
        n = len(self.nodes)
        if n == len(self._states):
            self._states = np.vstack([self._states, np.empty_like(self._states)])
        self._states[n] = node.state
        self.nodes.append(node)
        return n

    def edges(self):
        """``(child, parent)`` pairs for every non-root node."""
        return [(i, n.parent) for i, n in enumerate(self.nodes) if n.parent is not None]


@dataclass
class PlanResult:
    tree: Tree
    path: list[int]
    iterations_used: int
    wall_time: float
    success: bool
    skipped_iterations: int = 0
    diverged_expansions: int = 0
    consulted_cost_range: tuple[float, float] = (math.inf, -math.inf)
    goal_node: int | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.tree)


@dataclass
class _Stats:
    skipped: int = 0
    diverged: int = 0
    jmin: float = math.inf
    jmax: float = -math.inf


def sample_target(cfg: PlannerConfig, rng: np.random.Generator) -> tuple[State, bool]:
    """Uniform state in the sampling bounds, or the goal with probability ``goal_bias``.

    Returns the state and whether it is the goal.
    """
    if rng.random() < cfg.goal_bias:
        return State(*map(float, cfg.x_goal)), True
    return State(float(rng.uniform(*cfg.theta_bounds)), float(rng.uniform(*cfg.omega_bounds))), False


def nearest_valid(tree: Tree, model: SurrogateModel, x_target, stats: _Stats | None = None):
    """Node minimising predicted cost-to-go among nodes with a valid query.

    Returns ``(node_id, predicted_cost)`` or ``(None, None)`` when no node is
    valid. Ties in predicted cost go to the older node.
    """
    states = tree.states
    queries = np.hstack([states, np.broadcast_to(np.asarray(x_target, dtype=float), states.shape)])
    valid, cost = model.evaluate(queries)
    if not valid.any():
        return None, None
    ids = np.flatnonzero(valid)
    if stats is not None:
        stats.jmin = min(stats.jmin, float(cost[ids].min()))
        stats.jmax = max(stats.jmax, float(cost[ids].max()))
    best = ids[np.argmin(cost[ids])]
    return int(best), float(cost[best])


def quantize(value: float, quantum: float, lo: float = -math.inf, hi: float = math.inf) -> float:
    """Round to a multiple of ``quantum``, staying inside ``[lo, hi]`` when a multiple fits."""
    q = round(value / quantum)
    qlo, qhi = math.ceil(lo / quantum - 1e-9), math.floor(hi / quantum + 1e-9)
    if qlo <= qhi:
        q = min(max(q, qlo), qhi)
    decimals = max(0, -int(math.floor(math.log10(quantum) + 1e-12)))
    return round(q * quantum, decimals)


def perturb_and_quantize(params: SteeringParams, sigma: float, bounds, rng: np.random.Generator,
                         quantum: float = 0.01, dt: float = 0.01) -> SteeringParams:
    """Draw each parameter from a normal around the prediction, truncated to ``bounds``.

    ``bounds`` has shape ``(3, 2)`` for ``(lam_theta0, lam_omega0, t_f)``.
    The draws are rounded to ``quantum``; ``t_f`` is floored at ``dt``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    mean = params.as_array()
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    mean_c = np.clip(mean, lo, hi)
    a, b = (lo - mean_c) / sigma, (hi - mean_c) / sigma
    draw = truncnorm.rvs(a, b, loc=mean_c, scale=sigma, random_state=rng)
    draw = np.clip(draw, lo, hi)
    lt = quantize(draw[0], quantum, lo[0], hi[0])
    lw = quantize(draw[1], quantum, lo[1], hi[1])
    tf = max(quantize(draw[2], quantum, lo[2], hi[2]), dt)
    return SteeringParams(lt, lw, tf)


def expand(tree: Tree, node_id: int, params: SteeringParams, dt: float = 0.01, w: float = 1.0,
           target=None, predicted_cost=None) -> int:
    """Integrate from a node and append the endpoint as a child.

    Raises:
        IntegrationDiverged: the tree is left unchanged.
    """
    parent = tree[node_id]
    traj = integrate(parent.state, params.costate, params.t_f, dt, w, record=False)
    cost = traj.cost
    node = TreeNode(
        state=traj.final_state,
        parent=node_id,
        edge_params=params,
        edge_cost=cost,
        cost_to_come=parent.cost_to_come + cost,
        target=None if target is None else State(*target),
        predicted_cost=predicted_cost,
    )
    return tree.add(node)


def extract_path(tree: Tree, goal_id: int) -> list[tuple[State, SteeringParams | None]]:
    """Root-to-goal list of ``(state, params of the edge into that state)``."""
    chain = []
    i = goal_id
    while i is not None:
        node = tree[i]
        chain.append((node.state, node.edge_params))
        i = node.parent
    return chain[::-1]


def path_ids(tree: Tree, goal_id: int) -> list[int]:
    ids = []
    i = goal_id
    while i is not None:
        ids.append(i)
        i = tree[i].parent
    return ids[::-1]


def in_goal(x, cfg: PlannerConfig) -> bool:
    return math.hypot(x[0] - cfg.x_goal[0], x[1] - cfg.x_goal[1]) <= cfg.goal_radius


def grow_tree(cfg: PlannerConfig, select, steer, rng: np.random.Generator | None = None) -> PlanResult:
    """RRT loop shared by the learned planner and the baseline.

    ``select(tree, target, stats)`` returns ``(node_id, predicted_cost)`` or
    ``(None, None)`` to skip the iteration; ``steer(tree, node_id, target,
    is_goal, rng)`` returns the edge parameters.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    t0 = time.perf_counter()
    tree = Tree(cfg.x_init, capacity=min(cfg.max_nodes, 4096))
    stats = _Stats()
    if in_goal(cfg.x_init, cfg):
        return PlanResult(tree, [0], 0, time.perf_counter() - t0, True, goal_node=0)
    it = 0
    goal = None
    while it < cfg.max_iterations and len(tree) < cfg.max_nodes:
        it += 1
        target, is_goal = sample_target(cfg, rng)
        node_id, jhat = select(tree, target, stats)
        if node_id is None:
            stats.skipped += 1
            continue
        params = steer(tree, node_id, target, is_goal, rng)
        try:
            new = expand(tree, node_id, params, cfg.dt, cfg.w, target=target, predicted_cost=jhat)
        except IntegrationDiverged:
            stats.diverged += 1
            continue
        if in_goal(tree[new].state, cfg):
            goal = new
            break
    return PlanResult(
        tree=tree,
        path=path_ids(tree, goal) if goal is not None else [],
        iterations_used=it,
        wall_time=time.perf_counter() - t0,
        success=goal is not None,
        skipped_iterations=stats.skipped,
        diverged_expansions=stats.diverged,
        consulted_cost_range=(stats.jmin, stats.jmax),
        goal_node=goal,
    )


def plan(cfg: PlannerConfig, model: SurrogateModel) -> PlanResult:
    """Run the learned RRT until a node lands in the goal region or the budget runs out."""

    def select(tree, target, stats):
        return nearest_valid(tree, model, target, stats)

    def steer(tree, node_id, target, is_goal, rng):
        pred = model.predict_steering(tree[node_id].state, target)
        sigma = cfg.sigma_goal if is_goal else cfg.sigma
        return perturb_and_quantize(pred, sigma, model.param_bounds, rng, cfg.quantum, cfg.dt)

    return grow_tree(cfg, select, steer)
