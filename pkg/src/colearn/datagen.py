"""Raw dataset generation by sampling initial states and costates.

Each simulation draws an initial state and a costate angle ``phi``, solves
the free-final-time constraint ``H*(x0, lam0) = 0`` for ``lam_omega`` and
integrates the optimal ODEs until the cost or the distance travelled exceeds
its cap. Every ``harvest_stride`` steps the prefix trajectory becomes one
dataset entry, so a single simulation yields many entries with increasing
final times.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Costate, State, optimal_hamiltonian, rk4_step_batch

HAMILTONIAN_TOL = 1e-9


@dataclass(frozen=True)
class SteeringParams:
    lam_theta0: float
    lam_omega0: float
    t_f: float

    def __post_init__(self):
        if not self.t_f > 0:
            raise ValueError(f"t_f must be positive, got {self.t_f}")

    @property
    def costate(self) -> Costate:
        return Costate(self.lam_theta0, self.lam_omega0)

    def as_array(self) -> np.ndarray:
        return np.array([self.lam_theta0, self.lam_omega0, self.t_f])


@dataclass(frozen=True)
class DatasetEntry:
    x0: State
    x1: State
    cost: float
    params: SteeringParams
    sim_id: int = -1


@dataclass(frozen=True)
class StopRule:
    """Ends a simulation once cost or distance from the start exceeds its cap."""

    cost_cap: float = 2.0
    state_cap: float = 1.5

    def __post_init__(self):
        if not (self.cost_cap > 0 and self.state_cap > 0):
            raise ValueError("caps must be positive")

    def fires(self, x0, x, cost) -> bool:
        return cost > self.cost_cap or math.hypot(x[0] - x0[0], x[1] - x0[1]) > self.state_cap


@dataclass(frozen=True)
class GenConfig:
    n_sims: int = 40000
    dt: float = 0.01
    cost_cap: float = 2.0
    state_cap: float = 1.5
    theta_range: tuple[float, float] = (-1.5 * math.pi, 0.5 * math.pi)
    omega_range: tuple[float, float] = (-math.pi, math.pi)
    phi_range: tuple[float, float] = (-0.5 * math.pi, 1.5 * math.pi)
    w: float = 1.0
    harvest_stride: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n_sims <= 0:
            raise ValueError("n_sims must be positive")
        if self.harvest_stride < 1:
            raise ValueError("harvest_stride must be >= 1")
        if not (self.dt > 0 and self.w > 0):
            raise ValueError("dt and w must be positive")
        for name in ("theta_range", "omega_range", "phi_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} is empty: {(lo, hi)}")
        StopRule(self.cost_cap, self.state_cap)

    @property
    def stop_rule(self) -> StopRule:
        return StopRule(self.cost_cap, self.state_cap)


class EmptyDatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Column store of dataset entries.

    ``x0`` and ``x1`` are ``(n, 2)``, ``params`` is ``(n, 3)`` holding
    ``(lam_theta0, lam_omega0, t_f)``, ``cost`` and ``sim_id`` are ``(n,)``.
    """

    x0: np.ndarray
    x1: np.ndarray
    cost: np.ndarray
    params: np.ndarray
    sim_id: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.cost)
        if self.sim_id is None:
            object.__setattr__(self, "sim_id", np.full(n, -1, dtype=np.int64))
        shapes = {
            "x0": (n, 2), "x1": (n, 2), "params": (n, 3), "sim_id": (n,),
        }
        for name, shape in shapes.items():
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} has shape {np.shape(getattr(self, name))}, expected {shape}")

    def __len__(self) -> int:
        return len(self.cost)

    def __getitem__(self, i: int) -> DatasetEntry:
        p = self.params[i]
        return DatasetEntry(
            x0=State(float(self.x0[i, 0]), float(self.x0[i, 1])),
            x1=State(float(self.x1[i, 0]), float(self.x1[i, 1])),
            cost=float(self.cost[i]),
            params=SteeringParams(float(p[0]), float(p[1]), float(p[2])),
            sim_id=int(self.sim_id[i]),
        )

    @property
    def queries(self) -> np.ndarray:
        """``(n, 4)`` array of ``(theta0, omega0, theta1, omega1)``."""
        return np.hstack([self.x0, self.x1])

    def take(self, idx) -> Dataset:
        idx = np.asarray(idx)
        return Dataset(self.x0[idx], self.x1[idx], self.cost[idx], self.params[idx], self.sim_id[idx])

    @classmethod
    def from_entries(cls, entries) -> Dataset:
        entries = list(entries)
        return cls(
            x0=np.array([e.x0 for e in entries], dtype=float).reshape(-1, 2),
            x1=np.array([e.x1 for e in entries], dtype=float).reshape(-1, 2),
            cost=np.array([e.cost for e in entries], dtype=float),
            params=np.array([e.params.as_array() for e in entries], dtype=float).reshape(-1, 3),
            sim_id=np.array([e.sim_id for e in entries], dtype=np.int64),
        )

    @classmethod
    def concatenate(cls, parts) -> Dataset:
        parts = list(parts)
        return cls(
            x0=np.concatenate([p.x0 for p in parts]),
            x1=np.concatenate([p.x1 for p in parts]),
            cost=np.concatenate([p.cost for p in parts]),
            params=np.concatenate([p.params for p in parts]),
            sim_id=np.concatenate([p.sim_id for p in parts]),
        )

    def equals(self, other: Dataset) -> bool:
        return len(self) == len(other) and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("x0", "x1", "cost", "params", "sim_id")
        )


def sample_costate(x0, phi: float, w: float = 1.0) -> Costate | None:
    """Initial costate on the ``H* = 0`` surface parametrised by an angle.

    ``lam_theta = tan(phi)`` and ``lam_omega`` is the root of
    ``lam_omega**2/2 - sin(theta0)*lam_omega - (w + lam_theta*omega0) = 0``
    on the branch picked by ``sign(cos(phi))``.

    Returns None when the root is complex, when ``phi`` sits on a tangent
    singularity, or when rounding leaves ``|H*|`` above ``1e-9``.
    """
    c = math.cos(phi)
    if abs(c) < 1e-9:
        return None
    theta0, omega0 = float(x0[0]), float(x0[1])
    lam_theta = math.tan(phi)
    b = math.sin(theta0)
    disc = b * b + 2.0 * w + 2.0 * lam_theta * omega0
    if disc < 0:
        return None
    s = 1.0 if c > 0 else -1.0
    root = math.sqrt(disc)
    # take the root without cancellation, then recover ours from the product -2(w + lt*om)
    if s * b >= 0:
        lam_omega = b + s * root
    else:
        other = b - s * root
        lam_omega = -2.0 * (w + lam_theta * omega0) / other if other != 0 else b + s * root
    lam = Costate(lam_theta, lam_omega)
    if abs(optimal_hamiltonian((theta0, omega0), lam, w)) > HAMILTONIAN_TOL:
        return None
    return lam


def sim_rng(seed: int, sim_index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(sim_index)])


def draw_initial_conditions(cfg: GenConfig, max_retries: int = 10000):
    """Draw ``(x0, lam0)`` for every simulation.

    Each simulation has its own generator seeded from ``(seed, index)``, so the
    result does not depend on how the work is split. Rejected costates are
    redrawn and do not count as simulations.

    Returns:
        ``(x0, lam0)`` arrays of shape ``(n_sims, 2)``.
    """
    x0 = np.empty((cfg.n_sims, 2))
    lam0 = np.empty((cfg.n_sims, 2))
    for i in range(cfg.n_sims):
        rng = sim_rng(cfg.seed, i)
        for _ in range(max_retries):
            th = rng.uniform(*cfg.theta_range)
            om = rng.uniform(*cfg.omega_range)
            phi = rng.uniform(*cfg.phi_range)
            lam = sample_costate((th, om), phi, cfg.w)
            if lam is not None:
                break
        else:
            raise RuntimeError(f"simulation {i}: no valid costate after {max_retries} draws")
        x0[i] = th, om
        lam0[i] = lam
    return x0, lam0


def roll_out(x0, lam0, cfg: GenConfig, sim_ids=None) -> Dataset:
    """Integrate all simulations together and harvest intermediate points.

    The step on which a cap is exceeded ends that simulation and is not
    harvested; a simulation that diverges is ended the same way.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1, 2)
    lam0 = np.asarray(lam0, dtype=float).reshape(-1, 2)
    n = len(x0)
    if sim_ids is None:
        sim_ids = np.arange(n)
    sim_ids = np.asarray(sim_ids, dtype=np.int64)
    # cost grows at least at rate w, so every simulation stops by this step
    max_steps = int(math.ceil(cfg.cost_cap / (cfg.w * cfg.dt))) + 1
    y = np.vstack([x0.T, lam0.T, np.zeros(n)])
    alive = np.ones(n, dtype=bool)
    chunks = []
    with np.errstate(all="ignore"):
        for step in range(1, max_steps + 1):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            y_new = rk4_step_batch(y[:, idx], cfg.dt, cfg.w)
            dist = np.hypot(y_new[0] - x0[idx, 0], y_new[1] - x0[idx, 1])
            bad = ~np.isfinite(y_new).all(axis=0) | (y_new[4] > cfg.cost_cap) | (dist > cfg.state_cap)
            alive[idx[bad]] = False
            keep = idx[~bad]
            y[:, keep] = y_new[:, ~bad]
            if step % cfg.harvest_stride == 0 and keep.size:
                chunks.append((step, keep, y[:, keep].copy()))
    if not chunks:
        raise EmptyDatasetError("generation produced no entries")
    # order entries by simulation, then by time
    steps = np.concatenate([np.full(len(k), s) for s, k, _ in chunks])
    rows = np.concatenate([k for _, k, _ in chunks])
    vals = np.hstack([v for _, _, v in chunks])
    order = np.lexsort((steps, rows))
    steps, rows, vals = steps[order], rows[order], vals[:, order]
    params = np.column_stack([lam0[rows], steps * cfg.dt])
    return Dataset(
        x0=x0[rows].copy(),
        x1=vals[0:2].T.copy(),
        cost=vals[4].copy(),
        params=params,
        sim_id=sim_ids[rows],
    )


def generate_dataset(cfg: GenConfig) -> Dataset:
    x0, lam0 = draw_initial_conditions(cfg)
    return roll_out(x0, lam0, cfg)
