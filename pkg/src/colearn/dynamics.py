"""Pendulum optimal-control problem and its RK4 integration.

The pendulum has state ``(theta, omega)`` with ``f = (omega, sin(theta) + u)``
and running cost ``w + u**2 / 2``. Minimising the Hamiltonian over ``u`` gives
``u* = -lam_omega``; the state and costate then evolve as a coupled
four-dimensional ODE, and the running cost is carried along as a fifth
component so that cost and state stay consistent at every step.

Two integrators share one right-hand side:

* :func:`integrate` -- scalar, ``math``-based, used for replay and planning.
* :func:`integrate_batch` -- numpy-vectorised over many rows with per-row
  final times, used for evaluation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Protocol

import numpy as np


class State(NamedTuple):
    theta: float
    omega: float


class Costate(NamedTuple):
    lam_theta: float
    lam_omega: float


class IntegrationDiverged(ArithmeticError):
    """Raised when the integrated state stops being finite."""

    def __init__(self, step: int, time: float):
        super().__init__(f"non-finite state at step {step} (t={time:.6g} s)")
        self.step = step
        self.time = time


class StopCondition(Protocol):
    def fires(self, x0: State, x: State, cost: float) -> bool: ...


# ---------------------------------------------------------------------------
# Pendulum system
# ---------------------------------------------------------------------------


def state_derivative(x: State, u: float) -> tuple[float, float]:
    theta, omega = x
    return omega, math.sin(theta) + u


def optimal_input(lam: Costate) -> float:
    return -lam[1]


def optimal_hamiltonian(x, lam, w: float = 1.0):
    """H*(x, lam) = w + lam_theta*omega + lam_omega*sin(theta) - lam_omega**2/2.

    Works on scalars and on numpy arrays alike.
    """
    theta, omega = x[0], x[1]
    lt, lw = lam[0], lam[1]
    return w + lt * omega + lw * np.sin(theta) - 0.5 * lw * lw


def _rhs(th, om, lt, lw, w, sin, cos):
    # d/dt of (theta, omega, lam_theta, lam_omega, cost) under u = -lam_omega
    return om, sin(th) - lw, -lw * cos(th), -lt, w + 0.5 * lw * lw


def augmented_derivative(x: State, lam: Costate, w: float = 1.0):
    """Return ``(dx, dlam, dcost)`` for the optimal state/costate system."""
    dth, dom, dlt, dlw, dc = _rhs(x[0], x[1], lam[0], lam[1], w, math.sin, math.cos)
    return (dth, dom), (dlt, dlw), dc


@dataclass(frozen=True)
class PendulumSystem:
    """System definition consumed by data generation and planning.

    Other input-affine systems can be added by providing the same methods.
    """

    w: float = 1.0

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError(f"cost weight must be positive, got {self.w}")

    def hamiltonian(self, x, lam):
        return optimal_hamiltonian(x, lam, self.w)

    def derivative(self, x, lam):
        return augmented_derivative(x, lam, self.w)


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------


def step_count(t_f: float, dt: float) -> int:
    """Number of RK4 steps to reach ``t_f``; the last one may be shorter."""
    ratio = t_f / dt
    n = round(ratio)
    if abs(ratio - n) <= 1e-9 * max(1.0, ratio):
        return max(int(n), 1)
    return int(math.ceil(ratio))


@dataclass(frozen=True)
class Trajectory:
    """Samples of an integrated optimal trajectory.

    ``states`` and ``costates`` have shape ``(n, 2)``; ``times`` and
    ``running_cost`` have shape ``(n,)``. Row 0 is the initial condition.
    """

    times: np.ndarray
    states: np.ndarray
    costates: np.ndarray
    running_cost: np.ndarray
    dt: float
    final_time: float
    stopped_early: bool = False

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> State:
        return State(float(self.states[-1, 0]), float(self.states[-1, 1]))

    @property
    def cost(self) -> float:
        return float(self.running_cost[-1])

    def hamiltonian(self, w: float = 1.0) -> np.ndarray:
        return optimal_hamiltonian(self.states.T, self.costates.T, w)


def _rk4_scalar(y, h, w):
    sin, cos = math.sin, math.cos
    th, om, lt, lw, c = y
    k1 = _rhs(th, om, lt, lw, w, sin, cos)
    hh = 0.5 * h
    k2 = _rhs(th + hh * k1[0], om + hh * k1[1], lt + hh * k1[2], lw + hh * k1[3], w, sin, cos)
    k3 = _rhs(th + hh * k2[0], om + hh * k2[1], lt + hh * k2[2], lw + hh * k2[3], w, sin, cos)
    k4 = _rhs(th + h * k3[0], om + h * k3[1], lt + h * k3[2], lw + h * k3[3], w, sin, cos)
    h6 = h / 6.0
    return (
        th + h6 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        om + h6 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        lt + h6 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        lw + h6 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
        c + h6 * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4]),
    )


def integrate(
    x0,
    lam0,
    t_f: float,
    dt: float = 0.01,
    w: float = 1.0,
    stop: StopCondition | None = None,
    record: bool = True,
) -> Trajectory:
    """Classical RK4 on the optimal state/costate/cost system.

    Steps of ``dt`` from 0 to ``t_f``; the last step is shortened to land on
    ``t_f`` exactly. If ``stop`` fires on a step, that step is dropped and the
    trajectory ends at the previous one with ``stopped_early`` set.

    With ``record=False`` only the initial and final samples are kept, which is
    what planning needs.

    Raises:
        IntegrationDiverged: the state became NaN/Inf.
    """
    if not (t_f > 0 and dt > 0):
        raise ValueError(f"need t_f > 0 and dt > 0, got t_f={t_f}, dt={dt}")
    if dt > t_f * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds t_f={t_f}")
    x0 = State(float(x0[0]), float(x0[1]))
    n = step_count(t_f, dt)
    y = (x0[0], x0[1], float(lam0[0]), float(lam0[1]), 0.0)
    rows = [y]
    times = [0.0]
    t = 0.0
    stopped = False
    isfinite = math.isfinite
    for i in range(1, n + 1):
        h = dt if i < n else t_f - (n - 1) * dt
        y_new = _rk4_scalar(y, h, w)
        t_new = t_f if i == n else i * dt
        if not all(isfinite(v) for v in y_new):
            raise IntegrationDiverged(i, t_new)
        if stop is not None and stop.fires(x0, State(y_new[0], y_new[1]), y_new[4]):
            stopped = True
            break
        y, t = y_new, t_new
        if record:
            rows.append(y)
            times.append(t)
    if not record and t > 0:
        rows.append(y)
        times.append(t)
    arr = np.array(rows, dtype=float)
    return Trajectory(
        times=np.array(times),
        states=arr[:, 0:2],
        costates=arr[:, 2:4],
        running_cost=arr[:, 4],
        dt=dt,
        final_time=t,
        stopped_early=stopped,
    )


def rk4_step_batch(y: np.ndarray, h, w: float = 1.0) -> np.ndarray:
    """One RK4 step on rows of ``(theta, omega, lam_theta, lam_omega, cost)``.

    ``y`` has shape ``(5, n)``; ``h`` is a scalar or an ``(n,)`` array.
    """
    sin, cos = np.sin, np.cos

    def f(z):
        return np.array(_rhs(z[0], z[1], z[2], z[3], w, sin, cos))

    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_batch(x0, lam0, t_f, dt: float = 0.01, w: float = 1.0):
    """Integrate many rows at once, each to its own final time.

    Args:
        x0, lam0: arrays of shape ``(n, 2)``.
        t_f: array of shape ``(n,)``.

    Returns:
        ``(x_final, cost, ok)`` where ``x_final`` is ``(n, 2)``, ``cost`` is
        ``(n,)`` and ``ok`` flags rows that stayed finite.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1, 2)
    lam0 = np.asarray(lam0, dtype=float).reshape(-1, 2)
    t_f = np.asarray(t_f, dtype=float).reshape(-1)
    n_rows = len(t_f)
    steps = np.array([step_count(t, dt) for t in t_f], dtype=int)
    last_h = t_f - (steps - 1) * dt
    y = np.vstack([x0.T, lam0.T, np.zeros(n_rows)])
    ok = np.ones(n_rows, dtype=bool)
    with np.errstate(all="ignore"):
        for i in range(1, int(steps.max(initial=0)) + 1):
            active = steps >= i
            if not active.any():
                break
            h = np.where(steps == i, last_h, dt)[active]
            y_act = rk4_step_batch(y[:, active], h, w)
            y[:, active] = y_act
            ok[active] &= np.isfinite(y_act).all(axis=0)
    return y[0:2].T.copy(), y[4].copy(), ok
