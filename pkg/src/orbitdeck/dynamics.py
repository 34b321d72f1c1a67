"""Two-body orbital dynamics with body-frame thrust.

Provides the physics truth for the game scenarios:

    * ``StateVector`` / ``VesselState`` -- inertial position, velocity,
      attitude and fuel of one vessel.
    * ``propagate`` -- fixed-step RK4 integration of
      ``r'' = -mu * r/|r|^3 + R @ a_body`` where ``a_body`` is a constant
      acceleration commanded in the vessel frame.
    * ``orbit_frame`` -- the orbit-local (LVLH-style) attitude used as the
      vessel frame: +Y along-track, +Z radial-out, +X completing the
      right-handed triad.
    * ``circular_orbit`` / ``elliptical_orbit`` -- state constructors used
      by scenario initialisation.

All quantities are SI (m, m/s, s) in a celestial-body-centred inertial
frame unless stated otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateOrbitError,
    InvalidOrbitError,
    NonFiniteError,
    SurfaceImpactError,
)


def vec3(x: float = 0.0, y: float = 0.0, z: float = 0.0) -> np.ndarray:
    """3-vector as a float64 ndarray."""
    return np.array([x, y, z], dtype=np.float64)


@dataclass(frozen=True)
class BodyParams:
    """Central body: gravitational parameter (m^3/s^2) and radius (m).

    ``mu == 0`` is allowed as a zero-gravity test hook (pure thrust
    kinematics); real scenarios use a positive mu.
    """

    mu: float = 3.5316e12
    radius: float = 600e3

    def __post_init__(self):
        if self.mu < 0 or self.radius < 0:
            raise ValueError(f"mu and radius must be >= 0 (got {self.mu}, {self.radius})")


#: Default Kerbin-like central body used by every scenario.
DEFAULT_BODY = BodyParams()


@dataclass
class StateVector:
    """Inertial position (m) and velocity (m/s) of one point mass."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.velocity = np.asarray(self.velocity, dtype=np.float64)

    def copy(self) -> "StateVector":
        return StateVector(self.position.copy(), self.velocity.copy())


@dataclass
class VesselState:
    """A named vessel: translational state, attitude and remaining fuel.

    ``attitude`` is a 3x3 rotation taking vessel-frame coordinates to the
    inertial frame.  Fuel bookkeeping happens in the scenario layer; this
    type only carries the number.
    """

    state: StateVector
    attitude: np.ndarray
    fuel: float
    name: str = ""

    def __post_init__(self):
        self.attitude = np.asarray(self.attitude, dtype=np.float64)
        if self.fuel < 0:
            raise ValueError(f"fuel must be >= 0 (got {self.fuel})")


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix for a rotation of ``angle`` rad about ``axis`` (Rodrigues)."""
    a = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(a)
    if n == 0:
        raise ValueError("rotation axis must be nonzero")
    x, y, z = a / n
    c, s = math.cos(angle), math.sin(angle)
    cc = 1.0 - c
    return np.array(
        [
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ],
        dtype=np.float64,
    )


def _gravity(pos: np.ndarray, mu: float) -> np.ndarray:
    r = math.sqrt(pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2])
    if mu == 0.0:
        return np.zeros(3)
    return pos * (-mu / (r * r * r))


def propagate(
    state: StateVector,
    duration: float,
    body_accel: np.ndarray,
    attitude: np.ndarray,
    params: BodyParams,
    dt: float = 0.1,
) -> StateVector:
    """Advance ``state`` by ``duration`` seconds under gravity plus thrust.

    Classical fixed-step RK4 on ``r'' = -mu r/|r|^3 + R @ a_body`` with the
    vessel-frame acceleration ``body_accel`` and attitude ``R`` held
    constant over the call.  Runs ``floor(duration/dt)`` full steps plus one
    final partial step so the integration covers ``duration`` exactly.
    Pure function: the input state is not modified.

    Raises
    ------
    SurfaceImpactError
        If ``|r| <= params.radius`` at any step boundary (skipped for the
        zero-radius test body).
    NonFiniteError
        If any intermediate value is NaN or infinite.
    """
    if duration < 0:
        raise ValueError(f"duration must be >= 0 (got {duration})")
    if dt <= 0:
        raise ValueError(f"dt must be > 0 (got {dt})")

    accel_inertial = np.asarray(attitude, dtype=np.float64) @ np.asarray(
        body_accel, dtype=np.float64
    )
    mu = params.mu

    pos = state.position.copy()
    vel = state.velocity.copy()

    n_full = int(duration // dt)
    rem = duration - n_full * dt

    def step(p: np.ndarray, v: np.ndarray, h: float):
        k1v = _gravity(p, mu) + accel_inertial
        k1p = v
        p2 = p + 0.5 * h * k1p
        k2v = _gravity(p2, mu) + accel_inertial
        k2p = v + 0.5 * h * k1v
        p3 = p + 0.5 * h * k2p
        k3v = _gravity(p3, mu) + accel_inertial
        k3p = v + 0.5 * h * k2v
        p4 = p + h * k3p
        k4v = _gravity(p4, mu) + accel_inertial
        k4p = v + h * k3v
        p_new = p + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        v_new = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        return p_new, v_new

    steps = [dt] * n_full
    if rem > 1e-12:
        steps.append(rem)

    for h in steps:
        pos, vel = step(pos, vel, h)
        if not (np.isfinite(pos).all() and np.isfinite(vel).all()):
            raise NonFiniteError("propagation produced a non-finite state")
        if params.radius > 0:
            r = math.sqrt(pos[0] ** 2 + pos[1] ** 2 + pos[2] ** 2)
            if r <= params.radius:
                raise SurfaceImpactError(
                    f"radius {r:.1f} m <= body radius {params.radius:.1f} m"
                )

    return StateVector(pos, vel)


def orbit_frame(state: StateVector) -> np.ndarray:
    """Orbit-local attitude: vessel->inertial rotation for ``state``.

    Vessel axes expressed in the inertial frame (matrix columns):
    +Y = along-track (velocity component perpendicular to radial),
    +Z = radial-out, +X = Y x Z completing the right-handed triad.

    Raises DegenerateOrbitError when position and velocity are parallel
    (or either is zero), where along-track is undefined.
    """
    r = state.position
    v = state.velocity
    rn = np.linalg.norm(r)
    vn = np.linalg.norm(v)
    if rn == 0 or vn == 0:
        raise DegenerateOrbitError("zero position or velocity")
    h = np.cross(r, v)
    hn = np.linalg.norm(h)
    if hn < 1e-12 * rn * vn:
        raise DegenerateOrbitError("position parallel to velocity (radial trajectory)")
    up = r / rn
    along = np.cross(h / hn, up)
    right = np.cross(along, up)
    return np.column_stack([right, along, up])


def circular_orbit(
    radius: float, phase: float = 0.0, params: BodyParams = DEFAULT_BODY
) -> StateVector:
    """Planar (equatorial) circular orbit state at true longitude ``phase``.

    Speed is sqrt(mu/r), velocity perpendicular to position, prograde
    (counter-clockwise seen from +z).
    """
    if radius <= params.radius:
        raise InvalidOrbitError(
            f"orbit radius {radius} must exceed body radius {params.radius}"
        )
    c, s = math.cos(phase), math.sin(phase)
    speed = math.sqrt(params.mu / radius)
    return StateVector(
        position=vec3(radius * c, radius * s, 0.0),
        velocity=vec3(-speed * s, speed * c, 0.0),
    )


def elliptical_orbit(
    apoapsis: float,
    periapsis: float,
    true_anomaly: float = 0.0,
    apsis_longitude: float = 0.0,
    params: BodyParams = DEFAULT_BODY,
) -> StateVector:
    """Planar elliptical orbit state at the given true anomaly.

    ``apsis_longitude`` is the inertial longitude of periapsis; apoapsis
    sits at ``apsis_longitude + pi``.  Degenerates to ``circular_orbit``
    when apoapsis == periapsis.
    """
    if periapsis <= params.radius:
        raise InvalidOrbitError(
            f"periapsis {periapsis} must exceed body radius {params.radius}"
        )
    if apoapsis < periapsis:
        raise InvalidOrbitError(
            f"apoapsis {apoapsis} must be >= periapsis {periapsis}"
        )
    a = 0.5 * (apoapsis + periapsis)
    e = (apoapsis - periapsis) / (apoapsis + periapsis)
    p = a * (1.0 - e * e)
    nu = true_anomaly
    r = p / (1.0 + e * math.cos(nu))
    # Perifocal position/velocity, then rotate the apsidal line into place.
    pos_pf = vec3(r * math.cos(nu), r * math.sin(nu), 0.0)
    vfac = math.sqrt(params.mu / p)
    vel_pf = vec3(-vfac * math.sin(nu), vfac * (e + math.cos(nu)), 0.0)
    rot = rotation_about_axis(vec3(0, 0, 1), apsis_longitude)
    return StateVector(rot @ pos_pf, rot @ vel_pf)


def specific_energy(state: StateVector, params: BodyParams) -> float:
    """v^2/2 - mu/|r|, conserved on a coast arc."""
    r = np.linalg.norm(state.position)
    v = np.linalg.norm(state.velocity)
    return 0.5 * v * v - params.mu / r


def angular_momentum(state: StateVector) -> np.ndarray:
    """Specific angular momentum r x v, conserved on a coast arc."""
    return np.cross(state.position, state.velocity)


def orbital_period(radius_or_sma: float, params: BodyParams) -> float:
    """Kepler period 2*pi*sqrt(a^3/mu) for semi-major axis ``a``."""
    if radius_or_sma <= 0:
        raise InvalidOrbitError("semi-major axis must be positive")
    return 2.0 * math.pi * math.sqrt(radius_or_sma**3 / params.mu)


def vis_viva_speed(r: float, semi_major: float, params: BodyParams) -> float:
    """Speed at radius ``r`` on an orbit of the given semi-major axis."""
    return math.sqrt(params.mu * (2.0 / r - 1.0 / semi_major))
