"""Two-link acrobot with torque on the elbow joint, book dynamics.

The multitask family scales the length, mass and moment of inertia of both
links by the task parameters (centres of mass stay at the link midpoints).
Integration is one fourth-order Runge-Kutta step of ``DT`` per call; angles
wrap to [-pi, pi] and velocities are clipped.  Reward is -1 per step until the
tip height -cos(th1) - cos(th1 + th2) exceeds 1, which ends the episode with
reward 0 for the arriving step.
"""

from __future__ import annotations

import math

import numpy as np

DT = 0.2
GRAVITY = 9.8
TORQUES = (-1.0, 0.0, 1.0)
MAX_VEL_1 = 4.0 * math.pi
MAX_VEL_2 = 9.0 * math.pi


def action_spec(params):
    from . import ActionSpec

    return ActionSpec(continuous=False, cardinality=3)


def observation_dim(params) -> int:
    return 6


def sample_initial(params, rng: np.random.Generator):
    th1, th2, dth1, dth2 = rng.uniform(-0.1, 0.1, size=4)
    return (float(th1), float(th2), float(dth1), float(dth2))


def observe(params, internal) -> np.ndarray:
    th1, th2, dth1, dth2 = internal
    return np.array(
        [math.cos(th1), math.sin(th1), math.cos(th2), math.sin(th2), dth1, dth2]
    )


def _derivatives(params, state, torque):
    l1 = params.link_length
    lc1 = lc2 = params.link_length / 2.0
    m1 = m2 = params.link_mass
    i1 = i2 = params.link_inertia
    th1, th2, dth1, dth2 = state
    g = GRAVITY
    d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2.0 * l1 * lc2 * math.cos(th2)) + i1 + i2
    d2 = m2 * (lc2**2 + l1 * lc2 * math.cos(th2)) + i2
    phi2 = m2 * lc2 * g * math.cos(th1 + th2 - math.pi / 2.0)
    phi1 = (
        -m2 * l1 * lc2 * dth2**2 * math.sin(th2)
        - 2.0 * m2 * l1 * lc2 * dth2 * dth1 * math.sin(th2)
        + (m1 * lc1 + m2 * l1) * g * math.cos(th1 - math.pi / 2.0)
        + phi2
    )
    ddth2 = (
        torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dth1**2 * math.sin(th2) - phi2
    ) / (m2 * lc2**2 + i2 - d2**2 / d1)
    ddth1 = -(d2 * ddth2 + phi1) / d1
    return (dth1, dth2, ddth1, ddth2)


def _rk4_step(params, state, torque):
    k1 = _derivatives(params, state, torque)
    s2 = tuple(s + 0.5 * DT * k for s, k in zip(state, k1))
    k2 = _derivatives(params, s2, torque)
    s3 = tuple(s + 0.5 * DT * k for s, k in zip(state, k2))
    k3 = _derivatives(params, s3, torque)
    s4 = tuple(s + DT * k for s, k in zip(state, k3))
    k4 = _derivatives(params, s4, torque)
    return tuple(
        s + DT / 6.0 * (a + 2.0 * b + 2.0 * c + d)
        for s, a, b, c, d in zip(state, k1, k2, k3, k4)
    )


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def advance(params, internal, action):
    torque = TORQUES[action]
    th1, th2, dth1, dth2 = _rk4_step(params, internal, torque)
    th1, th2 = _wrap(th1), _wrap(th2)
    dth1 = max(-MAX_VEL_1, min(MAX_VEL_1, dth1))
    dth2 = max(-MAX_VEL_2, min(MAX_VEL_2, dth2))
    new = (th1, th2, dth1, dth2)
    reached_goal = -math.cos(th1) - math.cos(th1 + th2) > 1.0
    reward = 0.0 if reached_goal else -1.0
    return new, reward, reached_goal
