"""Torque-limited pendulum, the common frictionless formulation.

A uniform rod of mass m and length l pivots at one end (inertia m l^2 / 3);
the angle is measured from upright.  One semi-implicit Euler step of size
``DT`` per call, torque clipped to [-MAX_TORQUE, MAX_TORQUE], angular velocity
clipped to [-MAX_SPEED, MAX_SPEED].  The per-step cost is
angle^2 + 0.1 vel^2 + 0.001 torque^2 with the angle wrapped to [-pi, pi].
"""

from __future__ import annotations

import math

import numpy as np

DT = 0.05
GRAVITY = 10.0
MAX_TORQUE = 2.0
MAX_SPEED = 8.0


def action_spec(params):
    from . import ActionSpec

    return ActionSpec(continuous=True, dim=1, low=(-MAX_TORQUE,), high=(MAX_TORQUE,))


def observation_dim(params) -> int:
    return 3


def sample_initial(params, rng: np.random.Generator) -> tuple[float, float]:
    theta = rng.uniform(-math.pi, math.pi)
    theta_dot = rng.uniform(-1.0, 1.0)
    return (theta, theta_dot)


def observe(params, internal) -> np.ndarray:
    theta, theta_dot = internal
    return np.array([math.cos(theta), math.sin(theta), theta_dot])


def wrap_angle(theta: float) -> float:
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


def advance(params, internal, action) -> tuple[tuple[float, float], float, bool]:
    theta, theta_dot = internal
    torque = float(action[0])
    m, l = params.pole_mass, params.pole_length
    cost = wrap_angle(theta) ** 2 + 0.1 * theta_dot**2 + 0.001 * torque**2
    accel = 3.0 * GRAVITY / (2.0 * l) * math.sin(theta) + 3.0 / (m * l * l) * torque
    theta_dot = theta_dot + DT * accel
    theta_dot = max(-MAX_SPEED, min(MAX_SPEED, theta_dot))
    theta = theta + DT * theta_dot
    return (theta, theta_dot), -cost, False


def mechanical_energy(params, internal) -> float:
    """Kinetic plus potential energy; conserved under zero torque (no clipping)."""
    theta, theta_dot = internal
    m, l = params.pole_mass, params.pole_length
    inertia = m * l * l / 3.0
    return 0.5 * inertia * theta_dot**2 + m * GRAVITY * (l / 2.0) * math.cos(theta)
