"""Cart-pole dynamics shared by the balance and swing-up variants.

Standard pole-on-cart equations of motion with a continuous horizontal force,
integrated with one semi-implicit Euler step of ``DT`` per call.  The angle is
measured from upright.

Balance starts near upright, earns +1 per step, and fails once the pole tilts
beyond 12 degrees or the cart leaves [-2.4, 2.4].  Swing-up starts pole-down,
never fails, and is rewarded with 2 / (1 + exp(d)) + cos(psi) where d is the
distance of the pole tip from the upright position at the track centre.
"""

from __future__ import annotations

import math

import numpy as np

DT = 0.02
GRAVITY = 9.8
MAX_FORCE = 10.0
ANGLE_LIMIT = 12.0 * math.pi / 180.0
TRACK_LIMIT = 2.4


def action_spec(params):
    from . import ActionSpec

    return ActionSpec(continuous=True, dim=1, low=(-MAX_FORCE,), high=(MAX_FORCE,))


def observation_dim(params) -> int:
    return 4 if params.kind == "cartpole_balance" else 5


def sample_initial(params, rng: np.random.Generator):
    x, x_dot, theta, theta_dot = rng.uniform(-0.05, 0.05, size=4)
    if params.kind == "cartpole_swingup":
        theta += math.pi  # pole hangs down
    return (float(x), float(x_dot), float(theta), float(theta_dot))


def observe(params, internal) -> np.ndarray:
    x, x_dot, theta, theta_dot = internal
    if params.kind == "cartpole_balance":
        return np.array([x, x_dot, theta, theta_dot])
    return np.array([x, x_dot, math.cos(theta), math.sin(theta), theta_dot])


def _integrate(params, internal, force):
    x, x_dot, theta, theta_dot = internal
    m_p, half_len, m_c = params.pole_mass, params.pole_half_length, params.cart_mass
    total = m_c + m_p
    pm_l = m_p * half_len
    sin_t, cos_t = math.sin(theta), math.cos(theta)
    temp = (force + pm_l * theta_dot**2 * sin_t) / total
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
        half_len * (4.0 / 3.0 - m_p * cos_t**2 / total)
    )
    x_acc = temp - pm_l * theta_acc * cos_t / total
    x_dot += DT * x_acc
    theta_dot += DT * theta_acc
    x += DT * x_dot
    theta += DT * theta_dot
    return (x, x_dot, theta, theta_dot)


def advance(params, internal, action):
    force = float(action[0])
    new = _integrate(params, internal, force)
    x, _, theta, _ = new
    if params.kind == "cartpole_balance":
        failed = abs(theta) > ANGLE_LIMIT or abs(x) > TRACK_LIMIT
        return new, 1.0, failed
    # swing-up: distance of the pole tip from upright at the track centre
    length = 2.0 * params.pole_half_length
    tip_x = x + length * math.sin(theta)
    tip_y = length * math.cos(theta)
    d = math.hypot(tip_x, tip_y - length)
    reward = 2.0 / (1.0 + math.exp(d)) + math.cos(theta)
    return new, reward, False
