import math

import numpy as np
import pytest

from slipnet.annotation import CLASS_SLIP, CLASS_STOP, considered_pillars
from slipnet.core import CENTER_PILLAR, N_PILLARS, median_filter_array
from slipnet.simgen import (
    DatasetSpec,
    DriveProfile,
    PillarPhysics,
    RigScenario,
    anchor_displacements,
    generate_dataset,
    generate_slip_sequence,
    generate_stop_sequence,
    inject_noise_glitches,
    step_physics,
)

from .conftest import make_sequence


def single_pillar_physics(k=1.0, mu_s_n=2.0, mu_s=1.2, mu_k=0.8):
    """All nine pillars identical so closed forms apply to each."""
    return PillarPhysics(
        stiffness=np.full(9, k),
        normal_force=np.full(9, mu_s_n / mu_s),
        mu_static=mu_s,
        mu_kinetic=mu_k,
    )


def run_translation(physics, v=1.0, seconds=3.0, direction=0.0):
    t = np.arange(int(seconds * 1000)) * 1e-3
    anchor = anchor_displacements(
        t, "translation", direction, DriveProfile(v_peak=v), None
    )
    return step_physics(anchor, physics, np.ones(9, bool))


def scan_interval_oracle(trace, movement, contact):
    """Independent ground-truth scan: cumulative slipped-ever state per frame.

    Start = first frame where any considered pillar has slipped; end = first
    frame where all of them have.
    """
    cons = considered_pillars(movement, contact)
    ever = np.cumsum(trace.slip_flags[:, cons], axis=0) > 0
    any_row = np.flatnonzero(ever.any(axis=1))
    all_row = np.flatnonzero(ever.all(axis=1))
    start = None if len(any_row) == 0 else float(trace.t[any_row[0]])
    end = None if len(all_row) == 0 else float(trace.t[all_row[0]])
    return start, end


class TestStepper:
    def test_zero_drive_is_equilibrium(self):
        phys = single_pillar_physics()
        t = np.arange(500) * 1e-3
        anchor = np.zeros((500, 9, 2))
        trace = step_physics(anchor, phys, np.ones(9, bool))
        assert not trace.slip_flags.any()
        np.testing.assert_array_equal(trace.forces[:, :, :2], 0.0)

    def test_closed_form_onset(self):
        # k=1 N/mm, mu_s*N=2 N, v=1 mm/s constant: slip at t = 2.0 s
        trace = run_translation(single_pillar_physics(), v=1.0)
        onsets = trace.onset_times()
        for o in onsets:
            assert o == pytest.approx(2.0, abs=1e-3)

    def test_rotation_center_never_slips(self):
        phys = PillarPhysics.from_compression(1.2, rng=np.random.default_rng(0))
        t = np.arange(4000) * 1e-3
        anchor = anchor_displacements(
            t, "rotation", 0.0, None, DriveProfile(v_peak=math.radians(40.0))
        )
        trace = step_physics(anchor, phys, np.ones(9, bool))
        assert trace.onset_idx[CENTER_PILLAR] == -1
        assert not trace.slip_flags[:, CENTER_PILLAR].any()
        outer = [i for i in range(9) if i != CENTER_PILLAR]
        assert (trace.onset_idx[outer] >= 0).all()

    def test_friction_cone_invariant(self):
        phys = PillarPhysics.from_compression(1.4, rng=np.random.default_rng(3))
        trace = run_translation(phys, v=8.0, seconds=1.5, direction=0.7)
        norm = np.linalg.norm(trace.forces[:, :, :2], axis=2)
        limit = phys.mu_static * phys.normal_force
        assert np.all(norm <= limit[None, :] + 1e-9)

    def test_hooke_while_stuck(self):
        phys = single_pillar_physics()
        trace = run_translation(phys, v=1.0, seconds=1.5)  # stuck throughout
        d = DriveProfile(v_peak=1.0).displacement(trace.t)
        np.testing.assert_allclose(trace.forces[:, 0, 0], 1.0 * d, atol=1e-9)
        np.testing.assert_allclose(trace.forces[:, 0, 1], 0.0, atol=1e-12)

    def test_doubling_normal_force_doubles_onsets(self):
        t1 = run_translation(single_pillar_physics(mu_s_n=1.0), v=2.0).onset_times()
        t2 = run_translation(single_pillar_physics(mu_s_n=2.0), v=2.0).onset_times()
        for a, b in zip(t1, t2):
            assert b == pytest.approx(2.0 * a, abs=2e-3)

    def test_kinetic_force_during_slip(self):
        phys = single_pillar_physics(k=1.0, mu_s_n=2.0)
        trace = run_translation(phys, v=4.0, seconds=2.0)
        # well after onset (0.5 s) all pillars slide at the kinetic level
        norm = np.linalg.norm(trace.forces[-500:, :, :2], axis=2)
        kinetic = phys.mu_kinetic * phys.normal_force
        np.testing.assert_allclose(norm, np.broadcast_to(kinetic, norm.shape), atol=5e-3)


class TestGenerators:
    def test_slip_sequence_staggered_onsets(self):
        scn = RigScenario(movement="translation", speed_level="medium", rng_seed=9)
        seq, ann = generate_slip_sequence(scn)
        assert ann.sequence_class == CLASS_SLIP
        onsets = [o for o in ann.pillar_slip_onset if o is not None]
        assert len(onsets) == 9
        assert len(set(onsets)) == 9  # jitter makes them distinct
        assert ann.has_interval
        assert seq.t[-1] >= ann.incipient_end + 0.25  # post-slip hold retained

    def test_high_friction_degenerates_to_stop(self):
        scn = RigScenario(
            movement="translation",
            speed_level="custom",
            speed_mm_s=0.5,
            duration_cap_s=0.5,
            physics_overrides={"mu_static": 50.0, "mu_kinetic": 1.0},
            rng_seed=1,
        )
        seq, ann = generate_slip_sequence(scn)
        assert ann.sequence_class == CLASS_STOP

    def test_stop_sequence_has_zero_slip(self):
        for movement in ("translation", "rotation", "translation+rotation"):
            scn = RigScenario(movement=movement, speed_level="high", rng_seed=4)
            seq, ann = generate_stop_sequence(scn)
            assert ann.sequence_class == CLASS_STOP
            assert all(o is None for o in ann.pillar_slip_onset)

    def test_stop_sequence_stays_inside_friction_cone(self):
        scn = RigScenario(movement="translation", speed_level="high", rng_seed=4,
                          noise_sigma=0.0, glitch_per_frame=0.0)
        seq, _ = generate_stop_sequence(scn)
        rng = np.random.default_rng(scn.rng_seed)
        phys = PillarPhysics.from_compression(scn.compression_mm, rng=rng)
        norm = np.linalg.norm(seq.forces[:, :, :2], axis=2)
        assert np.all(norm < phys.mu_static * phys.normal_force[None, :])

    def test_stop_plateaus_are_simultaneous(self):
        scn = RigScenario(movement="translation", speed_level="medium", rng_seed=2,
                          noise_sigma=0.0, glitch_per_frame=0.0)
        seq, _ = generate_stop_sequence(scn)
        # plateau time = last frame where the pillar's force still changes
        plateau = []
        for p in range(N_PILLARS):
            diffs = np.abs(np.diff(seq.forces[:, p, 0])) + np.abs(np.diff(seq.forces[:, p, 1]))
            moving = np.flatnonzero(diffs > 1e-12)
            plateau.append(seq.t[moving[-1] + 1] if len(moving) else seq.t[0])
        assert max(plateau) - min(plateau) < 0.040

    def test_dataset_deterministic(self, tmp_path):
        from slipnet.dataio import save_dataset

        spec = DatasetSpec(slip_count=4, stop_count=2, seed=77)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_dataset(a, generate_dataset(spec))
        save_dataset(b, generate_dataset(spec))
        assert a.read_bytes() == b.read_bytes()

    def test_grid_covers_movements_and_speeds(self):
        spec = DatasetSpec(slip_count=27, stop_count=0, seed=1)
        seqs = generate_dataset(spec)
        combos = {(s.movement, s.meta["speed_level"]) for s in seqs}
        assert len(combos) == 9

    def test_default_counts(self):
        spec = DatasetSpec()
        assert spec.slip_count == 200 and spec.stop_count == 28


class TestAnnotationOracle:
    def test_interval_matches_flag_scan(self):
        rng = np.random.default_rng(11)
        movements = ("translation", "rotation", "translation+rotation")
        for trial in range(60):
            scn = RigScenario(
                movement=movements[trial % 3],
                compression_mm=float(rng.uniform(0.8, 1.6)),
                speed_level=("medium", "high")[trial % 2],
                direction_rad=float(rng.uniform(0, 2 * math.pi)),
                rng_seed=int(rng.integers(0, 2**32)),
                noise_sigma=0.0,
                glitch_per_frame=0.0,
            )
            seq, ann, trace = _run(scn)
            start, end = scan_interval_oracle(trace, scn.movement, seq.contact_mask)
            assert ann.sequence_class == CLASS_SLIP
            assert ann.incipient_start == start
            assert ann.incipient_end == end


def _run(scn):
    from slipnet.simgen import _run_scenario

    return _run_scenario(scn)


class TestNoiseAndGlitches:
    def test_zero_noise_is_identity(self, rng):
        seq = make_sequence(n=200)
        out = inject_noise_glitches(seq, 0.0, 0.0, 0.5, rng)
        np.testing.assert_array_equal(out.forces, seq.forces)

    def test_glitch_count_poisson_bound(self, rng):
        seq = make_sequence(n=100)
        n, lam = 1_000_000, 0.002
        count = rng.poisson(lam * n)
        expected = lam * n
        assert abs(count - expected) <= 4 * math.sqrt(expected)

    def test_injected_glitch_counts_match_rate(self):
        seq = make_sequence(n=10_000, forces=np.zeros((10_000, 9, 3)))
        rng = np.random.default_rng(5)
        out = inject_noise_glitches(seq, 0.0, 0.01, 0.5, rng)
        n_glitches = int(np.sum(np.abs(out.forces) > 0.25))
        expected = 0.01 * 10_000
        assert abs(n_glitches - expected) <= 4 * math.sqrt(expected)

    def test_single_glitch_removed_by_filter(self):
        x = np.zeros((200, 1))
        x[100, 0] = 5.0  # 10x the usual force scale
        out = median_filter_array(x, 21)
        assert np.all(out == 0.0)

    def test_noise_sample_mean_within_standard_error(self):
        rng = np.random.default_rng(8)
        samples = rng.normal(0.0, 0.001, size=10_000)
        assert abs(samples.mean()) <= 4 * 0.001 / math.sqrt(10_000)


class TestLaneAgreement:
    def test_numba_and_numpy_stepper_agree(self):
        from slipnet import _accel
        from slipnet.simgen import _stick_slip_jit, _stick_slip_numpy

        if not _accel.HAVE_NUMBA:
            pytest.skip("numba unavailable")
        phys = PillarPhysics.from_compression(1.2, rng=np.random.default_rng(0))
        t = np.arange(1500) * 1e-3
        anchor = anchor_displacements(
            t, "translation+rotation", 0.3,
            DriveProfile(v_peak=8.0, accel=50.0),
            DriveProfile(v_peak=math.radians(25.0), accel=math.radians(120.0)),
        )
        args = (anchor, phys.stiffness, phys.normal_force, phys.mu_static,
                phys.mu_kinetic, np.ones(9, bool), 1e-3, 1e-6)
        jit_out = _stick_slip_jit(*args)
        np_out = _stick_slip_numpy(*args)
        for a, b in zip(jit_out, np_out):
            np.testing.assert_array_equal(a, b)

    def test_numba_and_numpy_median_agree(self, rng):
        from slipnet import _accel
        from slipnet.core import _median_filter_jit, _median_filter_numpy

        if not _accel.HAVE_NUMBA:
            pytest.skip("numba unavailable")
        x = rng.normal(size=(300, 27))
        np.testing.assert_array_equal(_median_filter_jit(x, 21), _median_filter_numpy(x, 21))
