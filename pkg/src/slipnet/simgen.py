"""Synthetic stick-slip data generator with exact ground truth.

Each pillar is a spring-slider: while stuck, its tangential force grows as
stiffness times the deflection between the driven anchor and the tip contact
point; when the force exceeds the static friction limit mu_s * N the tip
starts sliding and the force saturates at the kinetic limit mu_k * N,
opposing relative motion; the tip re-sticks when its relative velocity falls
inside a small deadband. Normal forces are staggered across the grid (center
highest, corners lowest), so slip onsets spread out in time and every slip
sequence has a well-defined incipient interval.

The stepper is quasi-static: pillar inertia is negligible at these scales,
which keeps onset times closed-form checkable (t = mu_s*N / (k*v) under a
constant-speed drive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._accel import NUMBA_ENABLED, njit
from .annotation import SlipAnnotation, considered_pillars, incipient_interval
from .core import MIN_FRAMES, N_PILLARS, SAMPLE_DT, TactileSequence
from .errors import InvalidParameterError, NumericError

PILLAR_PITCH_MM = 3.5

# Normal force per mm of compression. The center pillar is tallest and
# carries the most; corners the least. All nine values are distinct so slip
# onsets stay separated even at 1 ms sampling.
_N_PATTERN = np.array([0.60, 1.00, 0.66, 1.08, 1.80, 1.16, 0.72, 1.24, 0.78])

SPEED_LEVELS = {
    #          v mm/s  a mm/s^2  omega deg/s  alpha deg/s^2
    "low": (4.0, 10.0, 12.0, 30.0),
    "medium": (8.0, 50.0, 25.0, 120.0),
    "high": (16.0, 100.0, 50.0, 240.0),
}

RESTICK_DEADBAND_MM_S = 1e-6
POST_SLIP_HOLD_S = 0.3
STOP_TRAIL_S = 0.4
STOP_DISPLACEMENT_MARGIN = 0.35


def pillar_grid_offsets(pitch_mm: float = PILLAR_PITCH_MM) -> np.ndarray:
    """(9, 2) x-y offsets of each pillar from the center, row-major grid."""
    out = np.zeros((N_PILLARS, 2))
    for i in range(N_PILLARS):
        row, col = divmod(i, 3)
        out[i] = ((col - 1) * pitch_mm, (1 - row) * pitch_mm)
    return out


@dataclass(frozen=True)
class PillarPhysics:
    """Per-pillar contact parameters. Stiffness in N/mm, forces in N."""

    stiffness: np.ndarray          # (9,)
    normal_force: np.ndarray       # (9,)
    mu_static: float = 1.2
    mu_kinetic: float = 0.8
    pitch_mm: float = PILLAR_PITCH_MM

    def __post_init__(self):
        object.__setattr__(self, "stiffness", np.asarray(self.stiffness, dtype=np.float64))
        object.__setattr__(self, "normal_force", np.asarray(self.normal_force, dtype=np.float64))
        if self.mu_kinetic >= self.mu_static:
            raise InvalidParameterError("kinetic friction must be below static friction")
        if np.any(self.normal_force < 0):
            raise InvalidParameterError("normal forces must be non-negative")

    @classmethod
    def from_compression(
        cls,
        compression_mm: float,
        rng: np.random.Generator | None = None,
        stiffness: float = 0.8,
        mu_static: float = 1.2,
        mu_kinetic: float = 0.8,
        jitter: float = 0.03,
        pitch_mm: float = PILLAR_PITCH_MM,
    ) -> "PillarPhysics":
        """Stagger normal forces by grid position, scaled by compression.

        The jitter (deterministic given ``rng``) varies the stagger between
        sequences; it is small enough to keep the per-pillar ordering.
        """
        n = _N_PATTERN * compression_mm
        if rng is not None and jitter > 0:
            n = n * (1.0 + rng.uniform(-jitter, jitter, size=N_PILLARS))
        return cls(
            stiffness=np.full(N_PILLARS, stiffness),
            normal_force=n,
            mu_static=mu_static,
            mu_kinetic=mu_kinetic,
            pitch_mm=pitch_mm,
        )


@dataclass
class RigScenario:
    """One data-collection run: how the rig drives the sensor."""

    movement: str = "translation"
    compression_mm: float = 1.2
    speed_level: str = "medium"          # low | medium | high | custom
    direction_rad: float = 0.0
    stop_event: bool = False
    duration_cap_s: float = 8.0
    speed_mm_s: float | None = None      # custom overrides
    accel_mm_s2: float | None = None     # None with custom speed = instant
    omega_deg_s: float | None = None
    alpha_deg_s2: float | None = None
    noise_sigma: float = 0.002
    glitch_per_frame: float = 5e-4       # expected spikes per frame
    glitch_magnitude: float = 0.5
    rng_seed: int = 0
    physics_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.duration_cap_s < 0.08:
            raise InvalidParameterError("duration cap must be at least 0.08 s")
        if self.speed_level != "custom" and self.speed_level not in SPEED_LEVELS:
            raise InvalidParameterError(f"unknown speed level {self.speed_level!r}")

    def resolved_rates(self) -> tuple[float, float | None, float, float | None]:
        """(v mm/s, a mm/s^2 or None, omega rad/s, alpha rad/s^2 or None)."""
        if self.speed_level == "custom":
            v, a = self.speed_mm_s or 0.0, self.accel_mm_s2
            om, al = self.omega_deg_s or 0.0, self.alpha_deg_s2
        else:
            v, a, om, al = SPEED_LEVELS[self.speed_level]
            if self.speed_mm_s is not None:
                v = self.speed_mm_s
            if self.omega_deg_s is not None:
                om = self.omega_deg_s
        if v <= 0 and om <= 0:
            raise InvalidParameterError("drive speed must be positive")
        omega = math.radians(om)
        alpha = math.radians(al) if al is not None else None
        return v, a, omega, alpha


# ---------------------------------------------------------------------------
# Drive profiles: piecewise-constant-acceleration velocity ramps with a
# closed-form displacement, evaluated exactly at each sample time.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriveProfile:
    """Trapezoidal speed profile. ``t_cruise_end``/``t_stop`` are inf for
    drives that never halt; ``accel`` None means the peak speed applies from
    t = 0."""

    v_peak: float
    accel: float | None = None
    t_cruise_end: float = math.inf
    t_stop: float = math.inf

    @property
    def t_accel_end(self) -> float:
        if self.accel in (None, math.inf) or self.accel <= 0:
            return 0.0
        return self.v_peak / self.accel

    def displacement(self, t):
        """Exact integral of the speed profile at time(s) ``t``."""
        t = np.asarray(t, dtype=np.float64)
        ta = self.t_accel_end
        a = 0.0 if ta == 0.0 else self.accel
        tc, ts = self.t_cruise_end, self.t_stop
        d_acc = 0.5 * a * np.minimum(t, ta) ** 2 if ta > 0 else np.zeros_like(t)
        d_cruise = self.v_peak * np.clip(t - ta, 0.0, None if tc == math.inf else tc - ta)
        if ts == math.inf:
            d_dec = 0.0
        else:
            u = np.clip(t - tc, 0.0, ts - tc)
            d_dec_rate = self.v_peak / (ts - tc) if ts > tc else 0.0
            d_dec = self.v_peak * u - 0.5 * d_dec_rate * u**2
            # cruise segment must not extend past tc when a stop exists
            d_cruise = self.v_peak * np.clip(t - ta, 0.0, tc - ta)
        return d_acc + d_cruise + d_dec

    def to_dict(self) -> dict:
        return {
            "v_peak": self.v_peak,
            "accel": self.accel,
            "t_cruise_end": None if self.t_cruise_end == math.inf else self.t_cruise_end,
            "t_stop": None if self.t_stop == math.inf else self.t_stop,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DriveProfile":
        return cls(
            v_peak=float(d["v_peak"]),
            accel=d["accel"],
            t_cruise_end=math.inf if d["t_cruise_end"] is None else float(d["t_cruise_end"]),
            t_stop=math.inf if d["t_stop"] is None else float(d["t_stop"]),
        )


def _stopping_profile(v: float, accel: float | None, budget: float) -> DriveProfile:
    """Trapezoid (or triangle) whose total displacement equals ``budget``."""
    a = accel if accel is not None else 200.0 * max(v, 1e-9)  # near-instant ramp
    x_ramps = v * v / a  # accel + symmetric decel distance
    if x_ramps >= budget:
        v_peak = math.sqrt(budget * a)
        ta = v_peak / a
        return DriveProfile(v_peak=v_peak, accel=a, t_cruise_end=ta, t_stop=2 * ta)
    ta = v / a
    t_hold = (budget - x_ramps) / v
    tc = ta + t_hold
    return DriveProfile(v_peak=v, accel=a, t_cruise_end=tc, t_stop=tc + ta)


def anchor_displacements(
    t: np.ndarray,
    movement: str,
    direction_rad: float,
    linear: DriveProfile | None,
    angular: DriveProfile | None,
    pitch_mm: float = PILLAR_PITCH_MM,
) -> np.ndarray:
    """(N, 9, 2) driven-anchor displacement of every pillar, in mm.

    Rotation is about the center pillar, so its anchor never moves; the
    outer anchors follow circular arcs at tangential speed omega * radius.
    """
    n = len(t)
    out = np.zeros((n, N_PILLARS, 2))
    if movement in ("translation", "translation+rotation"):
        if linear is None:
            raise InvalidParameterError("translation requires a linear profile")
        d = linear.displacement(t)
        out += d[:, None, None] * np.array([math.cos(direction_rad), math.sin(direction_rad)])
    if movement in ("rotation", "translation+rotation"):
        if angular is None:
            raise InvalidParameterError("rotation requires an angular profile")
        phi = angular.displacement(t)  # radians
        offsets = pillar_grid_offsets(pitch_mm)
        c, s = np.cos(phi), np.sin(phi)
        rx, ry = offsets[:, 0], offsets[:, 1]
        out[:, :, 0] += c[:, None] * rx - s[:, None] * ry - rx
        out[:, :, 1] += s[:, None] * rx + c[:, None] * ry - ry
    return out


# ---------------------------------------------------------------------------
# Stick-slip stepper: numba kernel plus a vectorized numpy lane.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _stick_slip_jit(anchor, k, n_force, mu_s, mu_k, contact, dt, deadband):
    n = anchor.shape[0]
    fx = np.zeros((n, N_PILLARS))
    fy = np.zeros((n, N_PILLARS))
    flags = np.zeros((n, N_PILLARS), dtype=np.bool_)
    tip_speed = np.zeros((n, N_PILLARS))
    onset_idx = np.full(N_PILLARS, -1, dtype=np.int64)
    sx = np.zeros(N_PILLARS)
    sy = np.zeros(N_PILLARS)
    slipping = np.zeros(N_PILLARS, dtype=np.bool_)
    for t in range(n):
        for p in range(N_PILLARS):
            if not contact[p]:
                continue
            ax = anchor[t, p, 0]
            ay = anchor[t, p, 1]
            dx = ax - sx[p]
            dy = ay - sy[p]
            dmag = math.sqrt(dx * dx + dy * dy)
            if not slipping[p] and k[p] * dmag > mu_s * n_force[p]:
                slipping[p] = True
                if onset_idx[p] < 0:
                    onset_idx[p] = t
            step_mm = 0.0
            if slipping[p]:
                target = mu_k * n_force[p] / k[p]
                if dmag - target > deadband * dt:
                    scale = target / dmag
                    sx[p] = ax - dx * scale
                    sy[p] = ay - dy * scale
                    step_mm = dmag - target
                    dx = ax - sx[p]
                    dy = ay - sy[p]
                else:
                    slipping[p] = False
            fx[t, p] = k[p] * dx
            fy[t, p] = k[p] * dy
            tip_speed[t, p] = step_mm / dt
            flags[t, p] = slipping[p]
    return fx, fy, flags, tip_speed, onset_idx


def _stick_slip_numpy(anchor, k, n_force, mu_s, mu_k, contact, dt, deadband):
    n = anchor.shape[0]
    fx = np.zeros((n, N_PILLARS))
    fy = np.zeros((n, N_PILLARS))
    flags = np.zeros((n, N_PILLARS), dtype=bool)
    tip_speed = np.zeros((n, N_PILLARS))
    onset_idx = np.full(N_PILLARS, -1, dtype=np.int64)
    s = np.zeros((N_PILLARS, 2))
    slipping = np.zeros(N_PILLARS, dtype=bool)
    target = mu_k * n_force / k
    limit = mu_s * n_force
    for t in range(n):
        d = anchor[t] - s
        dmag = np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1])
        newly = (~slipping) & contact & (k * dmag > limit)
        onset_idx[newly & (onset_idx < 0)] = t
        slipping |= newly
        slide = slipping & (dmag - target > deadband * dt)
        if slide.any():
            scale = np.where(slide, target / np.where(dmag > 0, dmag, 1.0), 1.0)
            s = np.where(slide[:, None], anchor[t] - d * scale[:, None], s)
            d = anchor[t] - s
        tip_speed[t] = np.where(slide, dmag - target, 0.0) / dt
        slipping = slide
        fx[t] = np.where(contact, k * d[:, 0], 0.0)
        fy[t] = np.where(contact, k * d[:, 1], 0.0)
        flags[t] = slipping
    return fx, fy, flags, tip_speed, onset_idx


@dataclass
class SimTrace:
    """Raw stepper output, before sensor noise. Slip flags and tip speeds
    are the ground truth the hardware rig obtained from camera tracking."""

    t: np.ndarray
    forces: np.ndarray       # (N, 9, 3), clean
    slip_flags: np.ndarray   # (N, 9) bool
    tip_speed: np.ndarray    # (N, 9) mm/s
    onset_idx: np.ndarray    # (9,) int, -1 = never slipped

    def onset_times(self) -> list[float | None]:
        return [None if i < 0 else float(self.t[i]) for i in self.onset_idx]


def step_physics(
    anchor: np.ndarray,
    physics: PillarPhysics,
    contact_mask: np.ndarray,
    dt: float = SAMPLE_DT,
    deadband: float = RESTICK_DEADBAND_MM_S,
) -> SimTrace:
    """Run the stick-slip stepper over precomputed anchor displacements."""
    anchor = np.ascontiguousarray(anchor, dtype=np.float64)
    contact = np.ascontiguousarray(contact_mask, dtype=bool)
    args = (
        anchor,
        physics.stiffness,
        physics.normal_force,
        physics.mu_static,
        physics.mu_kinetic,
        contact,
        dt,
        deadband,
    )
    if NUMBA_ENABLED:
        fx, fy, flags, tip_speed, onset_idx = _stick_slip_jit(*args)
    else:
        fx, fy, flags, tip_speed, onset_idx = _stick_slip_numpy(*args)
    if not (np.all(np.isfinite(fx)) and np.all(np.isfinite(fy))):
        raise NumericError("stick-slip stepper produced non-finite forces")
    n = anchor.shape[0]
    forces = np.zeros((n, N_PILLARS, 3))
    forces[:, :, 0] = fx
    forces[:, :, 1] = fy
    forces[:, :, 2] = physics.normal_force * contact
    return SimTrace(
        t=np.arange(n) * dt,
        forces=forces,
        slip_flags=flags,
        tip_speed=tip_speed,
        onset_idx=onset_idx,
    )


def inject_noise_glitches(
    seq: TactileSequence,
    noise_sigma: float,
    glitch_per_frame: float,
    glitch_magnitude: float,
    rng: np.random.Generator,
) -> TactileSequence:
    """Additive Gaussian sensor noise plus Poisson-scheduled one-sample spikes.

    ``glitch_per_frame`` is the expected spike count per frame (spikes pick a
    random pillar/axis and sign).
    """
    if noise_sigma < 0 or glitch_per_frame < 0:
        raise InvalidParameterError("noise and glitch rates must be non-negative")
    out = seq.copy()
    n = len(out)
    if noise_sigma > 0:
        out.forces = out.forces + rng.normal(0.0, noise_sigma, size=out.forces.shape)
    if glitch_per_frame > 0:
        count = rng.poisson(glitch_per_frame * n)
        if count > 0:
            fi = rng.integers(0, n, size=count)
            ci = rng.integers(0, 3 * N_PILLARS, size=count)
            sign = rng.choice([-1.0, 1.0], size=count)
            flat = out.forces.reshape(n, 3 * N_PILLARS)
            for f, c, sgn in zip(fi, ci, sign):
                flat[f, c] += sgn * glitch_magnitude
    return out


# ---------------------------------------------------------------------------
# Scenario execution
# ---------------------------------------------------------------------------


def _build_profiles(scn: RigScenario, physics: PillarPhysics):
    v, a, omega, alpha = scn.resolved_rates()
    wants_lin = scn.movement in ("translation", "translation+rotation")
    wants_ang = scn.movement in ("rotation", "translation+rotation")
    linear = angular = None
    if scn.stop_event:
        margin = STOP_DISPLACEMENT_MARGIN * (0.5 if scn.movement == "translation+rotation" else 1.0)
        if wants_lin:
            budget = margin * float(
                np.min(physics.mu_static * physics.normal_force / physics.stiffness)
            )
            linear = _stopping_profile(v, a, budget)
        if wants_ang:
            cons = considered_pillars("rotation")
            radii = np.linalg.norm(pillar_grid_offsets(physics.pitch_mm), axis=1)[cons]
            phi_budget = margin * float(
                np.min(
                    physics.mu_static
                    * physics.normal_force[cons]
                    / (physics.stiffness[cons] * radii)
                )
            )
            angular = _stopping_profile(omega, alpha, phi_budget)
    else:
        if wants_lin:
            linear = DriveProfile(v_peak=v, accel=a)
        if wants_ang:
            angular = DriveProfile(v_peak=omega, accel=alpha)
    return linear, angular


def _slip_horizon(scn: RigScenario, physics: PillarPhysics, linear, angular) -> float:
    """Upper estimate of the time by which every considered pillar slipped."""
    ests = []
    disp_to_slip = physics.mu_static * physics.normal_force / physics.stiffness
    if linear is not None:
        d = float(np.max(disp_to_slip))
        t = linear.t_accel_end + d / linear.v_peak
        ests.append(t)
    if angular is not None:
        cons = considered_pillars("rotation")
        radii = np.linalg.norm(pillar_grid_offsets(physics.pitch_mm), axis=1)[cons]
        phi = float(np.max(disp_to_slip[cons] / radii))
        ests.append(angular.t_accel_end + phi / angular.v_peak)
    horizon = 1.5 * max(ests) + 0.5
    return min(horizon, scn.duration_cap_s)


def _run_scenario(scn: RigScenario) -> tuple[TactileSequence, SlipAnnotation, SimTrace]:
    rng = np.random.default_rng(scn.rng_seed)
    physics = PillarPhysics.from_compression(
        scn.compression_mm, rng=rng, **scn.physics_overrides
    )
    contact = np.ones(N_PILLARS, dtype=bool)
    linear, angular = _build_profiles(scn, physics)

    if scn.stop_event:
        t_stop = max(
            p.t_stop for p in (linear, angular) if p is not None
        )
        total = min(t_stop + STOP_TRAIL_S, scn.duration_cap_s)
    else:
        total = _slip_horizon(scn, physics, linear, angular)
    n = max(MIN_FRAMES, int(round(total / SAMPLE_DT)))

    t = np.arange(n) * SAMPLE_DT
    anchor = anchor_displacements(
        t, scn.movement, scn.direction_rad, linear, angular, physics.pitch_mm
    )
    trace = step_physics(anchor, physics, contact)

    if not scn.stop_event:
        cons = considered_pillars(scn.movement, contact)
        cons_idx = trace.onset_idx[cons]
        if np.all(cons_idx >= 0):
            last = int(np.max(cons_idx))
            keep = min(n, max(MIN_FRAMES, last + 1 + int(round(POST_SLIP_HOLD_S / SAMPLE_DT))))
            trace = SimTrace(
                t=trace.t[:keep],
                forces=trace.forces[:keep],
                slip_flags=trace.slip_flags[:keep],
                tip_speed=trace.tip_speed[:keep],
                onset_idx=np.where(trace.onset_idx < keep, trace.onset_idx, -1),
            )

    v, _, omega, _ = scn.resolved_rates()
    drive_speed = v if scn.movement != "rotation" else math.degrees(omega)
    seq = TactileSequence(
        t=trace.t,
        forces=trace.forces,
        movement=scn.movement,
        compression_mm=scn.compression_mm,
        drive_speed=drive_speed,
        contact_mask=contact,
        meta={
            "kind": "stop" if scn.stop_event else "slip",
            "seed": scn.rng_seed,
            "direction_rad": scn.direction_rad,
            "speed_level": scn.speed_level,
            "drive": {
                "linear": None if linear is None else linear.to_dict(),
                "angular": None if angular is None else angular.to_dict(),
            },
        },
    )
    ann = incipient_interval(trace.onset_times(), scn.movement, contact)
    seq = inject_noise_glitches(
        seq, scn.noise_sigma, scn.glitch_per_frame, scn.glitch_magnitude, rng
    )
    seq.annotation = ann
    return seq, ann, trace


def generate_slip_sequence(scn: RigScenario) -> tuple[TactileSequence, SlipAnnotation]:
    """Drive until every considered pillar slips (plus a 0.3 s hold), then
    trim. High-friction setups that never slip inside the cap degenerate to
    the stop class."""
    seq, ann, _ = _run_scenario(replace(scn, stop_event=False))
    return seq, ann


def generate_stop_sequence(scn: RigScenario) -> tuple[TactileSequence, SlipAnnotation]:
    """Accelerate, cruise, and halt before any pillar reaches its friction
    limit; forces plateau together and no slip ever occurs."""
    seq, ann, trace = _run_scenario(replace(scn, stop_event=True))
    if np.any(trace.onset_idx >= 0):
        raise NumericError("stop scenario produced a slip; displacement budget violated")
    return seq, ann


def drive_displacement(meta: dict, t: float) -> tuple[float, float]:
    """(translation mm, rotation deg) of the rig at time ``t``, from the
    drive profiles recorded in sequence metadata."""
    drive = meta.get("drive", {})
    lin = drive.get("linear")
    ang = drive.get("angular")
    d_mm = float(DriveProfile.from_dict(lin).displacement(t)) if lin else 0.0
    d_deg = math.degrees(float(DriveProfile.from_dict(ang).displacement(t))) if ang else 0.0
    return d_mm, d_deg


# ---------------------------------------------------------------------------
# Corpus generation
# ---------------------------------------------------------------------------


@dataclass
class DatasetSpec:
    """Declarative grid for a reproducible corpus."""

    slip_count: int = 200
    stop_count: int = 28
    movements: tuple = ("translation", "rotation", "translation+rotation")
    speed_levels: tuple = ("low", "medium", "high")
    compressions_mm: tuple = (0.8, 1.2, 1.6)
    n_directions: int = 8
    duration_cap_s: float = 8.0
    noise_sigma: float = 0.002
    glitch_per_frame: float = 5e-4
    glitch_magnitude: float = 0.5
    seed: int = 0
    physics_overrides: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "slip_count": self.slip_count,
            "stop_count": self.stop_count,
            "movements": list(self.movements),
            "speed_levels": list(self.speed_levels),
            "compressions_mm": list(self.compressions_mm),
            "n_directions": self.n_directions,
            "duration_cap_s": self.duration_cap_s,
            "noise_sigma": self.noise_sigma,
            "glitch_per_frame": self.glitch_per_frame,
            "glitch_magnitude": self.glitch_magnitude,
            "seed": self.seed,
            "physics_overrides": self.physics_overrides,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        kw = dict(d)
        for key in ("movements", "speed_levels", "compressions_mm"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(**kw)


def generate_dataset(spec: DatasetSpec) -> list[TactileSequence]:
    """Deterministic corpus over the scenario grid, annotations attached.

    Scenarios cycle round-robin through movement x speed x compression cells
    (and through drive directions), so every combination is covered once the
    counts reach the grid size.
    """
    cells = [
        (m, s, c)
        for m in spec.movements
        for s in spec.speed_levels
        for c in spec.compressions_mm
    ]
    total = spec.slip_count + spec.stop_count
    seeds = np.random.SeedSequence(spec.seed).generate_state(max(total, 1), dtype=np.uint64)
    sequences: list[TactileSequence] = []
    for kind_count, stop_event in ((spec.slip_count, False), (spec.stop_count, True)):
        base = 0 if not stop_event else spec.slip_count
        for j in range(kind_count):
            movement, level, compression = cells[j % len(cells)]
            direction = 2.0 * math.pi * (j % spec.n_directions) / spec.n_directions
            scn = RigScenario(
                movement=movement,
                compression_mm=compression,
                speed_level=level,
                direction_rad=direction,
                stop_event=stop_event,
                duration_cap_s=spec.duration_cap_s,
                noise_sigma=spec.noise_sigma,
                glitch_per_frame=spec.glitch_per_frame,
                glitch_magnitude=spec.glitch_magnitude,
                rng_seed=int(seeds[base + j]),
                physics_overrides=dict(spec.physics_overrides),
            )
            seq, _, _ = _run_scenario(scn)
            seq.meta["sequence_id"] = f"{'stop' if stop_event else 'slip'}-{j:04d}"
            sequences.append(seq)
    return sequences
