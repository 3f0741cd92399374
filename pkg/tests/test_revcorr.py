"""Reverse-correlation estimators, accumulators, and trial logs."""

import numpy as np
import pytest

from noisebias.errors import EstimationError, InputError, SpaceMismatchError
from noisebias.features import FeatureSpace, FeatureVector, sample_white_noise
from noisebias.revcorr import (
    CLASS_A,
    CLASS_B,
    MODE_CLASSIC,
    MODE_NOISE_ONLY,
    Template,
    TemplateAccumulator,
    TrialRecord,
    accumulate,
    estimate_classic,
    estimate_cohorts,
    estimate_noise_only,
    iter_trial_log,
    merge,
    read_trial_log,
    reconstruct_stimulus,
    record_from_dict,
    record_to_dict,
    write_trial_log,
)

SPACE = FeatureSpace.external("toy", 2)


def _noise_trial(i, response, *, catch=False, true_class=None, cohort=None,
                 observer="obs"):
    return TrialRecord(
        trial_id=f"{observer}-{i:06d}", sample_seed=1000 + i, space_id="toy",
        response=response, is_catch=catch, true_class=true_class,
        observer_id=observer, cohort=cohort,
    )


def _vec(*vals):
    return FeatureVector("toy", np.asarray(vals, dtype=np.float64))


class TestTrialRecord:
    def test_response_validated(self):
        with pytest.raises(InputError):
            _noise_trial(0, "yes")

    def test_catch_requires_true_class(self):
        with pytest.raises(InputError):
            _noise_trial(0, CLASS_A, catch=True)

    def test_correct_flag(self):
        t = _noise_trial(0, CLASS_A, catch=True, true_class=CLASS_A)
        f = _noise_trial(1, CLASS_B, catch=True, true_class=CLASS_A)
        n = _noise_trial(2, CLASS_A)
        assert t.correct is True
        assert f.correct is False
        assert n.correct is None


class TestAccumulator:
    def test_accumulate_is_pure(self):
        acc0 = TemplateAccumulator.empty(SPACE)
        acc1 = accumulate(acc0, _noise_trial(0, CLASS_A), _vec(1.0, 0.0))
        assert acc0.count(None, CLASS_A) == 0
        assert acc1.count(None, CLASS_A) == 1
        np.testing.assert_array_equal(acc1.cell_sum(None, CLASS_A), [1.0, 0.0])

    def test_catch_trials_do_not_enter_cells(self):
        acc = TemplateAccumulator.empty(SPACE)
        rec = _noise_trial(0, CLASS_A, catch=True, true_class=CLASS_A)
        acc2 = accumulate(acc, rec, _vec(5.0, 5.0))
        assert acc2.total_count == 0
        assert acc2 == acc

    def test_space_checked(self):
        acc = TemplateAccumulator.empty(SPACE)
        with pytest.raises(SpaceMismatchError):
            accumulate(acc, _noise_trial(0, CLASS_A),
                       FeatureVector("other", np.zeros(2)))

    def test_merge_adds_cellwise(self):
        a = accumulate(TemplateAccumulator.empty(SPACE),
                       _noise_trial(0, CLASS_A), _vec(1.0, 2.0))
        b = accumulate(TemplateAccumulator.empty(SPACE),
                       _noise_trial(1, CLASS_A), _vec(3.0, 4.0))
        m = merge(a, b)
        assert m.count(None, CLASS_A) == 2
        np.testing.assert_array_equal(m.cell_sum(None, CLASS_A), [4.0, 6.0])

    def test_merge_space_checked(self):
        with pytest.raises(SpaceMismatchError):
            merge(TemplateAccumulator.empty(SPACE),
                  TemplateAccumulator.empty(FeatureSpace.external("o", 2)))

    def test_empty_cell_mean_rejected(self):
        acc = TemplateAccumulator.empty(SPACE)
        with pytest.raises(EstimationError):
            acc.cell_mean(None, CLASS_A)


class TestNoiseOnlyEstimator:
    def test_hand_case(self):
        # c = mean(A-responses) - mean(B-responses):
        # A cell: (1,0), (3,2) -> mean (2,1); B cell: (0,4) -> mean (0,4).
        acc = TemplateAccumulator.empty(SPACE)
        acc = accumulate(acc, _noise_trial(0, CLASS_A), _vec(1.0, 0.0))
        acc = accumulate(acc, _noise_trial(1, CLASS_A), _vec(3.0, 2.0))
        acc = accumulate(acc, _noise_trial(2, CLASS_B), _vec(0.0, 4.0))
        t = estimate_noise_only(acc)
        np.testing.assert_array_equal(t.values, [2.0, -3.0])
        assert t.trials_used == 3
        assert t.mode == MODE_NOISE_ONLY

    def test_empty_cell_reported_by_name(self):
        acc = accumulate(TemplateAccumulator.empty(SPACE),
                         _noise_trial(0, CLASS_A), _vec(1.0, 0.0))
        with pytest.raises(EstimationError, match="·B"):
            estimate_noise_only(acc)

    def test_catch_trials_never_affect_estimate(self):
        base = TemplateAccumulator.empty(SPACE)
        for i, (resp, v) in enumerate([(CLASS_A, (1.0, 0.0)),
                                       (CLASS_B, (0.0, 1.0))]):
            base = accumulate(base, _noise_trial(i, resp), _vec(*v))
        with_catch = accumulate(
            base, _noise_trial(9, CLASS_A, catch=True, true_class=CLASS_A),
            _vec(100.0, 100.0))
        np.testing.assert_array_equal(estimate_noise_only(base).values,
                                      estimate_noise_only(with_catch).values)


class TestClassicEstimator:
    def test_hand_case(self):
        # c = (mean_AA + mean_BA) - (mean_AB + mean_BB) with means
        # AA=(1,1), BA=(2,0), AB=(0,2), BB=(-1,-1) -> c = (4,0)-(−1,1)=(4,0)−(−1,1)
        acc = TemplateAccumulator.empty(SPACE)
        cells = [
            (CLASS_A, CLASS_A, (1.0, 1.0)),
            (CLASS_B, CLASS_A, (2.0, 0.0)),
            (CLASS_A, CLASS_B, (0.0, 2.0)),
            (CLASS_B, CLASS_B, (-1.0, -1.0)),
        ]
        for i, (tc, resp, v) in enumerate(cells):
            acc = accumulate(
                acc, TrialRecord(trial_id=f"t{i}", sample_seed=i,
                                 space_id="toy", response=resp,
                                 true_class=tc), _vec(*v))
        t = estimate_classic(acc)
        np.testing.assert_array_equal(t.values, [4.0, 0.0])
        assert t.trials_used == 4
        assert t.mode == MODE_CLASSIC

    def test_requires_all_four_cells(self):
        acc = TemplateAccumulator.empty(SPACE)
        acc = accumulate(acc, TrialRecord(trial_id="t", sample_seed=0,
                                          space_id="toy", response=CLASS_A,
                                          true_class=CLASS_A), _vec(1.0, 0.0))
        with pytest.raises(EstimationError):
            estimate_classic(acc)


class TestShardInvariance:
    def test_sharded_merge_bit_identical(self):
        g = np.random.default_rng(0)
        space = FeatureSpace.external("s16", 16)
        trials = []
        for i in range(400):
            resp = CLASS_A if g.random() < 0.5 else CLASS_B
            rec = TrialRecord(trial_id=f"t{i}", sample_seed=i,
                              space_id="s16", response=resp)
            trials.append((rec, sample_white_noise(space, i)))
        seq = TemplateAccumulator.empty(space)
        for rec, x in trials:
            seq = accumulate(seq, rec, x)
        for n_shards in (2, 5):
            shards = [TemplateAccumulator.empty(space)
                      for _ in range(n_shards)]
            for i, (rec, x) in enumerate(trials):
                shards[i % n_shards] = accumulate(shards[i % n_shards], rec, x)
            m = shards[0]
            for sh in shards[1:]:
                m = merge(m, sh)
            np.testing.assert_array_equal(
                estimate_noise_only(m).values,
                estimate_noise_only(seq).values)


class TestTemplate:
    def test_normalized(self):
        t = Template("toy", np.array([3.0, 4.0]), 10, MODE_NOISE_ONLY)
        np.testing.assert_allclose(t.normalized().values, [0.6, 0.8])
        assert np.linalg.norm(t.normalized().values) == pytest.approx(1.0)

    def test_zero_template_cannot_normalize(self):
        t = Template("toy", np.zeros(2), 1, MODE_NOISE_ONLY)
        with pytest.raises(InputError):
            t.normalized()


class TestCohorts:
    def test_per_cohort_estimates(self):
        trials = []
        for i in range(4):
            resp = CLASS_A if i % 2 == 0 else CLASS_B
            trials.append((_noise_trial(i, resp, cohort="g1"),
                           _vec(float(i), 1.0)))
        trials.append((_noise_trial(9, CLASS_A, cohort="g2"), _vec(1.0, 1.0)))
        templates, warnings = estimate_cohorts(trials)
        assert set(templates) == {"g1"}
        assert len(warnings) == 1 and "g2" in warnings[0]
        np.testing.assert_array_equal(templates["g1"].values, [-1.0, 0.0])

    def test_missing_tag_rejected(self):
        with pytest.raises(InputError):
            estimate_cohorts([(_noise_trial(0, CLASS_A), _vec(1.0, 1.0))])

    def test_custom_key(self):
        trials = [
            (_noise_trial(0, CLASS_A, observer="w1"), _vec(2.0, 0.0)),
            (_noise_trial(1, CLASS_B, observer="w1"), _vec(0.0, 2.0)),
        ]
        templates, warnings = estimate_cohorts(
            trials, key=lambda rec: rec.observer_id)
        assert set(templates) == {"w1"} and not warnings


class TestReconstruction:
    def test_noise_trial_needs_only_seed(self):
        rec = _noise_trial(3, CLASS_A)
        x = reconstruct_stimulus(rec, SPACE)
        np.testing.assert_array_equal(
            x.values, sample_white_noise(SPACE, rec.sample_seed).values)

    def test_stimulus_trial_adds_base(self):
        rec = TrialRecord(trial_id="t", sample_seed=77, space_id="toy",
                          response=CLASS_A, true_class=CLASS_B)
        base_b = _vec(10.0, -10.0)
        x = reconstruct_stimulus(rec, SPACE, base_a=_vec(0.0, 0.0),
                                 base_b=base_b)
        noise = sample_white_noise(SPACE, 77)
        np.testing.assert_array_equal(x.values, base_b.values + noise.values)

    def test_missing_base_rejected(self):
        rec = TrialRecord(trial_id="t", sample_seed=0, space_id="toy",
                          response=CLASS_A, true_class=CLASS_A)
        with pytest.raises(InputError):
            reconstruct_stimulus(rec, SPACE)

    def test_catch_trial_reconstructs_as_plain_noise(self):
        rec = _noise_trial(0, CLASS_A, catch=True, true_class=CLASS_A)
        x = reconstruct_stimulus(rec, SPACE)
        np.testing.assert_array_equal(
            x.values, sample_white_noise(SPACE, rec.sample_seed).values)


class TestTrialLog:
    def test_roundtrip_bytes_stable(self, tmp_path):
        recs = [
            _noise_trial(0, CLASS_A),
            _noise_trial(1, CLASS_B, cohort="g"),
            _noise_trial(2, CLASS_B, catch=True, true_class=CLASS_A),
        ]
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_trial_log(p1, recs)
        write_trial_log(p2, read_trial_log(p1))
        assert p1.read_bytes() == p2.read_bytes()
        assert read_trial_log(p1) == recs

    def test_meta_line_skipped(self, tmp_path):
        path = tmp_path / "log.jsonl"
        write_trial_log(path, [_noise_trial(0, CLASS_A)],
                        meta={"tool": "x", "config": {}})
        first = path.read_text().splitlines()[0]
        assert '"kind":"meta"' in first
        assert len(read_trial_log(path)) == 1

    def test_unknown_fields_rejected(self):
        with pytest.raises(InputError):
            record_from_dict({"trial_id": "t", "sample_seed": 0,
                              "space_id": "s", "response": "A",
                              "bogus": 1})

    def test_optional_fields_omitted(self):
        d = record_to_dict(_noise_trial(0, CLASS_A))
        assert "true_class" not in d and "cohort" not in d

    def test_error_reports_line_number(self, tmp_path):
        path = tmp_path / "log.jsonl"
        path.write_text('{"kind":"meta"}\n{"trial_id":"t"}\n')
        with pytest.raises(InputError, match=":2"):
            list(iter_trial_log(path))
