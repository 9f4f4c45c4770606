"""Rotary-wing flight: per-slot displacement kinematics and propulsion energy.

A slot's displacement action (ax, ay, az) in meters sets the horizontal and
vertical speeds v_h = sqrt(ax^2 + ay^2)/dt and v_v = |az|/dt.  Propulsion
power is the sum of a blade-profile term growing with v_h^2, an induced term
decaying with v_h, a parasite term growing with v_h^3, and climb power
m*g*v_v; multiplied by the slot duration it gives the slot energy:

    E = (P_B*(1 + 3 v_h^2 / U_tip^2)
         + P_I*(sqrt(1 + v_h^4/(4 v_0^4)) - v_h^2/(2 v_0^2))^(1/2)
         + 0.5*d_0*rho*s*G*v_h^3 + m*g*v_v) * dt
"""

import math
from dataclasses import dataclass

import numpy as np


class UavError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyModel:
    blade_power: float = 199.4
    induced_power: float = 88.66
    tip_speed: float = 120.0
    hover_induced_velocity: float = 4.03
    drag_ratio: float = 0.6
    rotor_solidity: float = 0.05
    air_density: float = 1.225
    disc_area: float = 0.53
    mass: float = 2.0
    gravity: float = 9.8

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) <= 0:
                raise UavError(f"energy model field {name} must be positive")


@dataclass(frozen=True)
class FlightBounds:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    z_min: float
    z_max: float

    def contains(self, p) -> bool:
        return (
            self.x_min <= p[0] <= self.x_max
            and self.y_min <= p[1] <= self.y_max
            and self.z_min <= p[2] <= self.z_max
        )


@dataclass(frozen=True)
class UavState:
    position: np.ndarray
    last_action: np.ndarray
    slot_duration: float = 1.0

    def __post_init__(self):
        if self.slot_duration <= 0:
            raise UavError("slot duration must be positive")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "last_action", np.asarray(self.last_action, dtype=float))


def scale_action(raw: np.ndarray, d_max: float) -> np.ndarray:
    """Map a raw [-1, 1]^3 command to a displacement with 2-norm <= d_max.

    Components are clipped then scaled by d_max/sqrt(3), which caps the
    infinity norm and therefore the Euclidean norm at d_max.
    """
    raw = np.clip(np.asarray(raw, dtype=float), -1.0, 1.0)
    return raw * (d_max / math.sqrt(3.0))


def apply_action(state: UavState, action, bounds: FlightBounds):
    """Displace the craft, clamping to the flight envelope.

    Returns (new_state, violated).  Leaving the envelope clamps the position
    to the boundary and flags the slot instead of ending the episode.
    """
    action = np.asarray(action, dtype=float)
    target = state.position + action
    clamped = np.array(
        [
            min(max(target[0], bounds.x_min), bounds.x_max),
            min(max(target[1], bounds.y_min), bounds.y_max),
            min(max(target[2], bounds.z_min), bounds.z_max),
        ]
    )
    violated = bool(np.any(clamped != target))
    new_state = UavState(clamped, action, state.slot_duration)
    return new_state, violated


def propulsion_energy(model: EnergyModel, action, dt: float) -> float:
    """Slot energy in joules for a displacement flown over dt seconds."""
    if dt <= 0:
        raise UavError(f"slot duration must be positive, got {dt}")
    action = np.asarray(action, dtype=float)
    v_h = math.hypot(action[0], action[1]) / dt
    v_v = abs(action[2]) / dt
    return power_at(model, v_h, v_v) * dt


def power_at(model: EnergyModel, v_h: float, v_v: float = 0.0) -> float:
    """Instantaneous propulsion power in watts at the given velocities."""
    blade = model.blade_power * (1.0 + 3.0 * v_h**2 / model.tip_speed**2)
    v0 = model.hover_induced_velocity
    # The bracket is mathematically >= 0; clip guards against cancellation
    # at extreme speeds.
    bracket = math.sqrt(1.0 + v_h**4 / (4.0 * v0**4)) - v_h**2 / (2.0 * v0**2)
    induced = model.induced_power * math.sqrt(max(bracket, 0.0))
    parasite = (
        0.5
        * model.drag_ratio
        * model.air_density
        * model.rotor_solidity
        * model.disc_area
        * v_h**3
    )
    climb = model.mass * model.gravity * v_v
    return blade + induced + parasite + climb


def hover_power(model: EnergyModel) -> float:
    return power_at(model, 0.0, 0.0)


def distance(a, b) -> float:
    """Euclidean distance between two 3-D points."""
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))
