import numpy as np
import pytest

from slipnet.annotation import CLASS_STOP, SlipAnnotation, incipient_interval
from slipnet.core import LABEL_INCIPIENT, LABEL_OTHER
from slipnet.errors import InvalidParameterError
from slipnet.evaluation import (
    confusion_matrix,
    detection_latency,
    judge_sequence,
    make_shifted_test,
    normalized_displacement,
    SequenceOutcome,
)


def slip_annotation(start=0.40, end=0.72):
    onsets = [start, end] + [None] * 7
    return incipient_interval(onsets, "translation")


def decisions_with_first_hit(times, hit_at):
    return [LABEL_INCIPIENT if t == hit_at else LABEL_OTHER for t in times], times


class TestJudgeSequence:
    times = [round(0.04 * k, 2) for k in range(1, 26)]  # 0.04 .. 1.0

    def test_detection_within_tolerance_before_onset(self):
        ann = slip_annotation(start=0.40)
        decisions, times = decisions_with_first_hit(self.times, 0.32)
        out = judge_sequence(decisions, times, ann)
        assert out.verdict == "TP"
        assert out.detection_time == pytest.approx(0.32)

    def test_detection_too_early_is_fp(self):
        ann = slip_annotation(start=0.40)
        decisions, times = decisions_with_first_hit(self.times, 0.08)
        assert judge_sequence(decisions, times, ann).verdict == "FP"

    def test_detection_after_interval_end_is_fp(self):
        ann = slip_annotation(start=0.40, end=0.72)
        decisions, times = decisions_with_first_hit(self.times, 0.80)
        assert judge_sequence(decisions, times, ann).verdict == "FP"

    def test_no_detection_on_slip_is_fp(self):
        ann = slip_annotation()
        out = judge_sequence([LABEL_OTHER] * 25, self.times, ann)
        assert out.verdict == "FP"
        assert out.detection_time is None

    def test_stop_with_detection_is_fn(self):
        ann = SlipAnnotation(sequence_class=CLASS_STOP)
        decisions, times = decisions_with_first_hit(self.times, 0.52)
        assert judge_sequence(decisions, times, ann).verdict == "FN"

    def test_stop_clean_is_tn(self):
        ann = SlipAnnotation(sequence_class=CLASS_STOP)
        assert judge_sequence([LABEL_OTHER] * 25, self.times, ann).verdict == "TN"

    def test_only_first_detection_counts(self):
        ann = slip_annotation(start=0.40)
        decisions = [LABEL_OTHER] * 25
        decisions[1] = LABEL_INCIPIENT   # 0.08 s, too early -> FP
        decisions[12] = LABEL_INCIPIENT  # would have been a hit
        assert judge_sequence(decisions, self.times, ann).verdict == "FP"

    def test_interval_end_exclusive(self):
        ann = slip_annotation(start=0.40, end=0.72)
        decisions, times = decisions_with_first_hit(self.times, 0.72)
        assert judge_sequence(decisions, times, ann).verdict == "FP"

    def test_mismatched_alignment_rejected(self):
        with pytest.raises(InvalidParameterError):
            judge_sequence([LABEL_OTHER] * 3, [0.04, 0.08], slip_annotation())

    def test_verdict_partition(self, rng):
        # every sequence maps to exactly one verdict; counts add up
        outcomes = []
        for i in range(200):
            if rng.random() < 0.3:
                ann = SlipAnnotation(sequence_class=CLASS_STOP)
            else:
                ann = slip_annotation(start=float(rng.uniform(0.2, 0.6)))
            decisions = [
                LABEL_INCIPIENT if rng.random() < 0.05 else LABEL_OTHER for _ in self.times
            ]
            outcomes.append(judge_sequence(decisions, self.times, ann, sequence_id=str(i)))
        cm = confusion_matrix(outcomes)
        assert cm.total == 200


class TestConfusionMatrix:
    def test_all_tp(self):
        outs = [
            SequenceOutcome("s", "slip", "TP", detection_time=0.1, incipient_start=0.1)
            for _ in range(10)
        ]
        cm = confusion_matrix(outs)
        assert cm.success_rate == 1.0

    def test_43_of_45(self):
        outs = [
            SequenceOutcome(str(i), "slip", "TP", detection_time=0.1, incipient_start=0.1)
            for i in range(43)
        ]
        outs += [SequenceOutcome("x", "slip", "FP"), SequenceOutcome("y", "slip", "FP")]
        cm = confusion_matrix(outs)
        assert cm.success_rate == pytest.approx(43 / 45, abs=1e-9)
        assert round(cm.success_rate, 3) == 0.956

    def test_empty_rejected(self):
        with pytest.raises(InvalidParameterError):
            confusion_matrix([])

    def test_reorder_invariant(self, rng):
        outs = [
            SequenceOutcome(str(i), "slip", v, detection_time=0.1 if v != "TN" else None,
                            incipient_start=0.1)
            for i, v in enumerate(rng.choice(["TP", "FP"], size=30))
        ]
        cm1 = confusion_matrix(outs)
        cm2 = confusion_matrix([outs[i] for i in rng.permutation(30)])
        assert cm1.to_dict() == cm2.to_dict()


class TestLatency:
    def test_detection_at_onset(self):
        out = SequenceOutcome("a", "slip", "TP", detection_time=0.5, incipient_start=0.5)
        lat = detection_latency([out])
        assert lat.values[0] == pytest.approx(0.0)

    def test_one_window_later(self):
        out = SequenceOutcome("a", "slip", "TP", detection_time=0.54, incipient_start=0.5)
        lat = detection_latency([out])
        assert lat.values[0] == pytest.approx(0.040)

    def test_only_tp_counted(self):
        outs = [
            SequenceOutcome("a", "slip", "TP", detection_time=0.54, incipient_start=0.5),
            SequenceOutcome("b", "slip", "FP", detection_time=0.1),
            SequenceOutcome("c", "stop", "TN"),
        ]
        assert detection_latency(outs).n == 1


class TestNormalizedDisplacement:
    def test_translation_anchor(self):
        assert normalized_displacement(2.0, "translation") == 1.0

    def test_zero(self):
        assert normalized_displacement(0.0, "translation") == 0.0

    def test_compound_mean_rule(self):
        assert normalized_displacement((1.0, 1.0), "translation+rotation") == 0.5

    def test_rotation_anchor(self):
        assert normalized_displacement(2.0, "rotation") == 1.0

    def test_linear(self):
        assert normalized_displacement(3.0, "translation") == 1.5

    def test_unknown_movement(self):
        with pytest.raises(InvalidParameterError):
            normalized_displacement(1.0, "sideways")


class TestShiftedTest:
    def test_shift_changes_data_keeps_validity(self, small_corpus):
        shifted = make_shifted_test(small_corpus, seed=3)
        assert len(shifted) == len(small_corpus)
        for orig, s in zip(small_corpus, shifted):
            s.validate()
            assert s.contact_mask.sum() < orig.contact_mask.sum() or len(s) != len(orig)

    def test_shift_deterministic(self, small_corpus):
        a = make_shifted_test(small_corpus, seed=3)
        b = make_shifted_test(small_corpus, seed=3)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.forces, y.forces)

    def test_empty_rejected(self):
        with pytest.raises(InvalidParameterError):
            make_shifted_test([], seed=0)
