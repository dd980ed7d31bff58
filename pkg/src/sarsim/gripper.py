"""Behavioural model of the passive magnetic gripper.

Permanent magnets hold a ferrous payload with no power; a push-button in the
pad reports whether something is attached. Two servos push the payload off
when a release is commanded, and that short pulse is the only time the
gripper draws power. The feedback bit is exactly the ``engaged`` flag.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

PICK_SUCCESS_PASSIVE = 0.97
PICK_SUCCESS_EPM = 0.53
CYCLE_AVERAGE_POWER_W = 3.48
LIFT_CAPACITY_G = 760.0
MAX_PAYLOAD_G = 500.0


class GripperFault(RuntimeError):
    pass


@dataclass(frozen=True)
class PayloadSpec:
    mass: float = 500.0  # grams
    radius: float = 0.05  # meters
    ferrous: bool = True

    def __post_init__(self):
        if not 0 < self.mass <= MAX_PAYLOAD_G:
            raise ValueError(f"payload mass must lie in (0, {MAX_PAYLOAD_G}] g, got {self.mass}")
        if not self.radius > 0:
            raise ValueError("payload radius must be positive")


@dataclass(frozen=True)
class GripperTiming:
    release_pulse_s: float = 0.2
    cycle_s: float = 0.5  # one pick-and-drop actuation cycle

    @property
    def servo_power_w(self) -> float:
        """Servo draw that makes the cycle average equal the reference figure."""
        return CYCLE_AVERAGE_POWER_W * self.cycle_s / self.release_pulse_s


@dataclass(frozen=True)
class GripperState:
    engaged: bool = False
    release_active: bool = False
    success_prob_pick: float = PICK_SUCCESS_PASSIVE
    success_prob_drop: float = 1.0
    lift_capacity_g: float = LIFT_CAPACITY_G
    timing: GripperTiming = GripperTiming()

    def __post_init__(self):
        for name in ("success_prob_pick", "success_prob_drop"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def feedback(self) -> int:
        return 1 if self.engaged else 0


def attempt_pick(
    g: GripperState, contact: bool, payload: PayloadSpec, rng: random.Random
) -> tuple[GripperState, int]:
    """Try to grab ``payload``. Returns the new state and the feedback bit.

    A random draw is consumed only when the attempt is physically possible
    (contact with a liftable ferrous payload).
    """
    if g.release_active:
        raise GripperFault("pick attempted while the release horns cover the pad")
    if g.engaged:
        return g, 1
    if not contact or not payload.ferrous or payload.mass > g.lift_capacity_g:
        return g, 0
    if rng.random() < g.success_prob_pick:
        g = replace(g, engaged=True)
    return g, g.feedback


def command_release(g: GripperState, rng: random.Random) -> tuple[GripperState, int]:
    """Fire the release servos; a 1 -> 0 feedback edge confirms the drop."""
    if not g.engaged:
        return replace(g, release_active=True), 0
    if rng.random() < g.success_prob_drop:
        return replace(g, release_active=True, engaged=False), 0
    return replace(g, release_active=True), 1


def arm_for_pick(g: GripperState) -> GripperState:
    """Retract the servos so the magnets are exposed again."""
    return replace(g, release_active=False)


def power_draw(g: GripperState) -> float:
    """Instantaneous draw in watts."""
    return g.timing.servo_power_w if g.release_active else 0.0


def cycle_average_power(timing: GripperTiming = GripperTiming(), dt: float = 0.001) -> float:
    """Average draw over one pick-and-drop cycle, integrated on a ``dt`` grid."""
    g = GripperState(timing=timing)
    steps = round(timing.cycle_s / dt)
    release_at = steps - round(timing.release_pulse_s / dt)
    rng = random.Random(0)
    g, _ = attempt_pick(g, True, PayloadSpec(), random.Random(0))
    energy = 0.0
    for k in range(steps):
        if k == release_at:
            g, _ = command_release(g, rng)
        energy += power_draw(g) * dt
    g = arm_for_pick(g)
    return energy / timing.cycle_s
