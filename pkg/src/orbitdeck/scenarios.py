"""Differential-game environments: pursuer-evader and lady-bandit-guard.

A :class:`Game` steps in agent-sized windows: the agent's discrete action
and every NPC policy are evaluated once at the window start (zero-order
hold), then all vessels are propagated together on the shared physics
step.  Vessel attitude is slaved to the orbit-local frame each physics
step, so "forward" always means along-track.  The closest-approach ledger
samples distances at physics-step resolution because the minimum can
occur mid-burn.

Scenario identifiers:

    e1..e4           pursuer-evader, evader policy e1..e4
    lbg1-lg0-i2 ...  lady-bandit-guard, policies lg0..lg2, orbits i1/i2

lg3 (obfuscated guard) is not supported and is rejected up front.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from . import dynamics
from .actions import DiscreteAction, to_accel
from .dynamics import BodyParams, StateVector, VesselState, orbit_frame, vec3
from .errors import (
    EpisodeFinishedError,
    SurfaceImpactError,
    UnsupportedScenarioError,
    ZeroRelativeVelocityError,
)
from .telemetry import Observation, ScoreLedger, ScoreParams, prograde

PE_POLICIES = ("e1", "e2", "e3", "e4")
LBG_POLICIES = ("lg0", "lg1", "lg2")
INIT_IDS = ("i1", "i2")


@dataclass(frozen=True)
class NpcParams:
    """Heuristic NPC tuning; none of these are fixed by the game rules."""

    # e2: random evasive burns when the pursuer is close.
    e2_trigger_range: float = 500.0
    e2_burn_prob: float = 0.3
    e2_burn_min: float = 0.5
    e2_burn_max: float = 1.5
    # e3: structured escape burn plus cooldown.
    e3_trigger_range: float = 400.0
    e3_burn_time: float = 5.0
    e3_cooldown: float = 10.0
    # lg1 guard: target / zero-velocity state machine.
    lg1_closing_cap: float = 10.0
    lg1_target_timeout: float = 10.0
    lg1_null_threshold: float = 0.5
    # lg2 lady: alternating out-of-plane bursts.
    lg2_trigger_range: float = 500.0
    lg2_burn_time: float = 2.0


@dataclass(frozen=True)
class ScenarioSpec:
    """Full configuration of one episode."""

    family: str  # "PE" | "LBG"
    policy_id: str
    init_id: str = "i2"
    max_time: float = 300.0
    max_accel: float = 0.5
    fuel: float = 100.0
    fuel_rate: float = 0.05  # kg/s per unit of axis throttle
    rng_seed: int = 0
    orbit_radius: float = 1.35e6
    pe_offset: float = 2000.0
    guard_offset: float = 600.0
    bandit_offset: float = 2000.0
    i1_periapsis_drop: float = 20e3
    i1_conjunction_time: float = 60.0
    dt: float = 0.1
    body: BodyParams = field(default_factory=BodyParams)
    npc: NpcParams = field(default_factory=NpcParams)
    score_params: ScoreParams = field(default_factory=ScoreParams)

    def __post_init__(self):
        if self.family == "PE":
            if self.policy_id not in PE_POLICIES:
                raise UnsupportedScenarioError(
                    f"unsupported evader policy {self.policy_id!r}"
                )
        elif self.family == "LBG":
            if self.policy_id == "lg3":
                raise UnsupportedScenarioError(
                    "lg3 (obfuscated guard) is not supported"
                )
            if self.policy_id not in LBG_POLICIES:
                raise UnsupportedScenarioError(
                    f"unsupported guard/lady policy {self.policy_id!r}"
                )
            if self.init_id not in INIT_IDS:
                raise UnsupportedScenarioError(
                    f"unsupported initial orbit id {self.init_id!r}"
                )
        else:
            raise UnsupportedScenarioError(f"unknown scenario family {self.family!r}")
        if self.max_time <= 0 or self.max_accel <= 0 or self.dt <= 0:
            raise ValueError("max_time, max_accel and dt must be positive")

    @property
    def scenario_id(self) -> str:
        if self.family == "PE":
            return self.policy_id
        return f"lbg1-{self.policy_id}-{self.init_id}"


_LBG_ID_RE = re.compile(r"^lbg\d*-(lg\d)-(i\d)$")


def parse_scenario_id(scenario_id: str, **overrides) -> ScenarioSpec:
    """Build a spec from an id string like ``e2`` or ``lbg1-lg0-i2``."""
    sid = scenario_id.strip().lower()
    if sid in PE_POLICIES:
        return ScenarioSpec(family="PE", policy_id=sid, **overrides)
    m = _LBG_ID_RE.match(sid)
    if m:
        return ScenarioSpec(
            family="LBG", policy_id=m.group(1), init_id=m.group(2), **overrides
        )
    raise UnsupportedScenarioError(f"unrecognized scenario id {scenario_id!r}")


def _solve_kepler(mean_anomaly: float, ecc: float) -> float:
    """Eccentric anomaly from mean anomaly (Newton iteration)."""
    E = mean_anomaly if ecc < 0.8 else math.pi
    for _ in range(64):
        delta = (E - ecc * math.sin(E) - mean_anomaly) / (1.0 - ecc * math.cos(E))
        E -= delta
        if abs(delta) < 1e-14:
            break
    return E


class Game:
    """One running episode; single-threaded stepping."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.clock = 0.0
        self.done = False
        self.status = "running"
        self.rng = np.random.default_rng(spec.rng_seed)
        if spec.family == "PE":
            self.agent_role, self.target_role, self.guard_role = (
                "pursuer",
                "evader",
                None,
            )
            self.ledger = ScoreLedger()
        else:
            self.agent_role, self.target_role, self.guard_role = (
                "bandit",
                "lady",
                "guard",
            )
            self.ledger = ScoreLedger.for_guard()
        self.vessels: dict[str, VesselState] = {}
        self._npc_state: dict[str, dict] = {}
        self._init_vessels()
        self._sample_ledger()

    # -- construction -----------------------------------------------------

    def _add_vessel(self, role: str, state: StateVector):
        self.vessels[role] = VesselState(
            state=state,
            attitude=orbit_frame(state),
            fuel=self.spec.fuel,
            name=role,
        )
        self._npc_state[role] = {}

    def _init_vessels(self):
        spec = self.spec
        r = spec.orbit_radius
        if spec.family == "PE":
            self._add_vessel("evader", dynamics.circular_orbit(r, 0.0, spec.body))
            self._add_vessel(
                "pursuer",
                dynamics.circular_orbit(r, -spec.pe_offset / r, spec.body),
            )
            return
        if spec.init_id == "i2":
            # One circular orbit: guard trails the lady, bandit trails the
            # guard; along-track arc offsets realized as phase angles.
            self._add_vessel("lady", dynamics.circular_orbit(r, 0.0, spec.body))
            guard_phase = -spec.guard_offset / r
            self._add_vessel(
                "guard", dynamics.circular_orbit(r, guard_phase, spec.body)
            )
            bandit_phase = guard_phase - spec.bandit_offset / r
            self._add_vessel(
                "bandit", dynamics.circular_orbit(r, bandit_phase, spec.body)
            )
            return
        # i1: lady and guard co-circular with the guard ahead; the bandit is
        # on an ellipse whose apoapsis touches the lady's orbit, timed and
        # aimed to reach it where the lady will be at the conjunction time.
        self._add_vessel("lady", dynamics.circular_orbit(r, 0.0, spec.body))
        self._add_vessel(
            "guard",
            dynamics.circular_orbit(r, spec.guard_offset / r, spec.body),
        )
        mu = spec.body.mu
        t_conj = spec.i1_conjunction_time
        apoapsis, periapsis = r, r - spec.i1_periapsis_drop
        sma = 0.5 * (apoapsis + periapsis)
        ecc = (apoapsis - periapsis) / (apoapsis + periapsis)
        conj_angle = math.sqrt(mu / r**3) * t_conj  # lady's longitude then
        mean_anom = math.pi - math.sqrt(mu / sma**3) * t_conj
        ecc_anom = _solve_kepler(mean_anom, ecc)
        true_anom = 2.0 * math.atan2(
            math.sqrt(1.0 + ecc) * math.sin(ecc_anom / 2.0),
            math.sqrt(1.0 - ecc) * math.cos(ecc_anom / 2.0),
        )
        self._add_vessel(
            "bandit",
            dynamics.elliptical_orbit(
                apoapsis,
                periapsis,
                true_anomaly=true_anom,
                apsis_longitude=conj_angle - math.pi,
                params=spec.body,
            ),
        )

    # -- stepping ---------------------------------------------------------

    def step(self, action: DiscreteAction) -> tuple[Observation, bool]:
        """Run one agent action window; returns (observation, done)."""
        if self.done:
            raise EpisodeFinishedError("episode already finished")
        spec = self.spec
        duration = action.duration
        if self.clock + duration > spec.max_time:
            duration = spec.max_time - self.clock  # truncate the last window

        agent = self.vessels[self.agent_role]
        accels = {}
        accel, _ = to_accel(action, spec.max_accel)
        if agent.fuel <= 0.0:
            accel = np.zeros(3)
        accels[self.agent_role] = accel
        axis_sum = abs(action.forward) + abs(action.right) + abs(action.up)
        agent.fuel = max(0.0, agent.fuel - spec.fuel_rate * axis_sum * duration)

        for role in self.vessels:
            if role != self.agent_role:
                accels[role] = self._npc_policy(role, duration)

        n_full = int(duration // spec.dt)
        rem = duration - n_full * spec.dt
        substeps = [spec.dt] * n_full
        if rem > 1e-9:
            substeps.append(rem)
        for h in substeps:
            try:
                for role, vessel in self.vessels.items():
                    frame = orbit_frame(vessel.state)
                    vessel.state = dynamics.propagate(
                        vessel.state, h, accels[role], frame, spec.body, dt=h
                    )
                    vessel.attitude = orbit_frame(vessel.state)
            except SurfaceImpactError:
                self.done = True
                self.status = "surface_impact"
                break
            self._sample_ledger()

        self.clock += duration
        if not self.done and self.clock >= spec.max_time - 1e-9:
            self.done = True
            self.status = "completed"
        return self.observe(), self.done

    def _sample_ledger(self):
        agent = self.vessels[self.agent_role].state.position
        target = self.vessels[self.target_role].state.position
        dist_lb = float(np.linalg.norm(target - agent))
        dist_bg = None
        if self.guard_role is not None:
            guard = self.vessels[self.guard_role].state.position
            dist_bg = float(np.linalg.norm(guard - agent))
        self.ledger.update(dist_lb, dist_bg)

    def observe(self) -> Observation:
        """Current observation for the agent vessel."""
        agent = self.vessels[self.agent_role]
        target = self.vessels[self.target_role]
        frame = agent.attitude
        rel_pos = frame.T @ (target.state.position - agent.state.position)
        rel_vel = frame.T @ (target.state.velocity - agent.state.velocity)
        try:
            pro = prograde(agent.state.velocity, target.state.velocity, frame)
        except ZeroRelativeVelocityError:
            pro = None
        guard_rel = None
        if self.guard_role is not None:
            guard = self.vessels[self.guard_role]
            guard_rel = frame.T @ (guard.state.position - agent.state.position)
        return Observation(
            time=self.clock,
            fuel=agent.fuel,
            rel_position=rel_pos,
            rel_velocity=rel_vel,
            prograde=pro,
            guard_rel_position=guard_rel,
        )

    # -- NPC policies -------------------------------------------------------

    def _npc_policy(self, role: str, window: float) -> np.ndarray:
        """Vessel-frame acceleration for an NPC, held for the window."""
        spec = self.spec
        if spec.family == "PE":
            return self._evader_policy(role, window)
        if role == "guard":
            if spec.policy_id in ("lg1", "lg2"):
                return self._guard_pursuit_policy(role, window)
            return np.zeros(3)
        if role == "lady" and spec.policy_id == "lg2":
            return self._lady_evade_policy(role, window)
        return np.zeros(3)

    def _rel_to(self, role: str, other: str) -> tuple[np.ndarray, np.ndarray, float]:
        """(rel position other-self, rel velocity other-self, distance), inertial."""
        a = self.vessels[role].state
        b = self.vessels[other].state
        dr = b.position - a.position
        dv = b.velocity - a.velocity
        return dr, dv, float(np.linalg.norm(dr))

    def _evader_policy(self, role: str, window: float) -> np.ndarray:
        spec, npc = self.spec, self.spec.npc
        policy = spec.policy_id
        if policy == "e1":
            return np.zeros(3)
        vessel = self.vessels[role]
        frame = vessel.attitude
        if policy == "e4":
            v = vessel.state.velocity
            return spec.max_accel * (frame.T @ (v / np.linalg.norm(v)))
        dr, _, dist = self._rel_to(role, "pursuer")
        mem = self._npc_state[role]
        if policy == "e2":
            if mem.get("burn_left", 0.0) > 0.0:
                mem["burn_left"] -= window
                return mem["burn_accel"].copy()
            if dist <= npc.e2_trigger_range and self.rng.random() < npc.e2_burn_prob:
                axis = int(self.rng.integers(0, 3))
                sign = 1.0 if self.rng.random() < 0.5 else -1.0
                burn = np.zeros(3)
                burn[axis] = sign * spec.max_accel
                mem["burn_accel"] = burn
                mem["burn_left"] = float(
                    self.rng.uniform(npc.e2_burn_min, npc.e2_burn_max)
                ) - window
                return burn.copy()
            return np.zeros(3)
        # e3: burst away from the pursuer, then cool down.
        phase = mem.get("phase", "idle")
        if phase == "burn":
            mem["timer"] -= window
            if mem["timer"] <= 0.0:
                mem["phase"], mem["timer"] = "cooldown", npc.e3_cooldown
                return np.zeros(3)
            los_away = -dr / dist  # away from the pursuer
            return spec.max_accel * (frame.T @ los_away)
        if phase == "cooldown":
            mem["timer"] -= window
            if mem["timer"] <= 0.0:
                mem["phase"] = "idle"
            return np.zeros(3)
        if dist <= npc.e3_trigger_range:
            mem["phase"], mem["timer"] = "burn", npc.e3_burn_time
            los_away = -dr / dist
            return spec.max_accel * (frame.T @ los_away)
        return np.zeros(3)

    def _guard_pursuit_policy(self, role: str, window: float) -> np.ndarray:
        """Target / zero-velocity pursuit toward the bandit."""
        spec, npc = self.spec, self.spec.npc
        vessel = self.vessels[role]
        frame = vessel.attitude
        dr, dv, dist = self._rel_to(role, "bandit")
        mem = self._npc_state[role]
        phase = mem.setdefault("phase", "target")
        mem.setdefault("timer", 0.0)
        if phase == "target":
            closing = -float(np.dot(dr, dv)) / dist if dist > 0 else 0.0
            if closing >= npc.lg1_closing_cap or mem["timer"] >= npc.lg1_target_timeout:
                mem["phase"], mem["timer"] = "zero_vel", 0.0
            else:
                mem["timer"] += window
                if dist > 0:
                    return spec.max_accel * (frame.T @ (dr / dist))
                return np.zeros(3)
        # zero_vel: null the relative velocity, then re-target.
        v_rel = -dv  # guard's velocity relative to the bandit
        speed = float(np.linalg.norm(v_rel))
        if speed < npc.lg1_null_threshold:
            mem["phase"], mem["timer"] = "target", window
            if dist > 0:
                return spec.max_accel * (frame.T @ (dr / dist))
            return np.zeros(3)
        return spec.max_accel * (frame.T @ (-v_rel / speed))

    def _lady_evade_policy(self, role: str, window: float) -> np.ndarray:
        """Alternating out-of-plane bursts while the bandit is close."""
        spec, npc = self.spec, self.spec.npc
        mem = self._npc_state[role]
        if mem.get("burn_left", 0.0) > 0.0:
            mem["burn_left"] -= window
            return vec3(mem["sign"] * spec.max_accel, 0.0, 0.0)
        _, _, dist = self._rel_to(role, "bandit")
        if dist <= npc.lg2_trigger_range:
            sign = mem.get("next_sign", 1.0)
            mem["sign"] = sign
            mem["next_sign"] = -sign
            mem["burn_left"] = npc.lg2_burn_time - window
            # Vessel +X is the negative orbit normal, so +-X is out-of-plane.
            return vec3(sign * spec.max_accel, 0.0, 0.0)
        return np.zeros(3)


def init_scenario(spec: ScenarioSpec) -> Game:
    """Construct a fresh episode from a scenario spec."""
    return Game(spec)
