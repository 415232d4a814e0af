import json

import numpy as np
import pytest

from bayesauth.synth import SynthConfig, run_synthetic


@pytest.fixture(scope="module")
def small_curve():
    return run_synthetic(SynthConfig(runs=200, population_size=300, seed=11))


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [{"runs": 0}, {"degree": 1}, {"sequence_length": 0}, {"gamma_shape": 0}, {"p_user_prior": 1.0}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SynthConfig(**kwargs)

    def test_enrollment_defaults_to_length(self):
        assert SynthConfig(sequence_length=7).enrollment == 7
        assert SynthConfig(sequence_length=7, enrollment_length=0).enrollment == 0


class TestCurve:
    def test_shape(self, small_curve):
        assert small_curve.rules == ("oracle", "world", "bias", "f_bias", "p_bias", "n_bias")
        assert small_curve.error_rate.shape == (6, 10)
        assert small_curve.errors.shape == (200, 6, 10)
        assert np.all(small_curve.lo <= small_curve.error_rate)
        assert np.all(small_curve.error_rate <= small_curve.hi)

    def test_paired_design_degeneracy(self, small_curve):
        # one item: nothing precedes it, so both prefix rules see no conditioning data
        world = small_curve.errors[:, 1, 0]
        np.testing.assert_array_equal(small_curve.errors[:, 2, 0], world)
        np.testing.assert_array_equal(small_curve.errors[:, 5, 0], world)

    def test_csv_and_json(self, small_curve):
        lines = small_curve.to_csv().splitlines()
        assert lines[0] == "prefix_len,rule,err,lo5,hi5"
        assert len(lines) == 1 + 6 * 10
        doc = json.loads(small_curve.to_json())
        assert doc["config"]["runs"] == 200
        assert len(doc["curve"]) == 60

    def test_oracle_is_best_at_full_length(self, small_curve):
        oracle = small_curve.curve("oracle")[-1]
        for name in small_curve.rules[1:]:
            assert oracle <= small_curve.hi[small_curve.rule_index(name), -1]


class TestModes:
    def test_deterministic(self):
        cfg = SynthConfig(runs=30, population_size=100, seed=5)
        assert run_synthetic(cfg).to_csv() == run_synthetic(cfg).to_csv()

    def test_seed_changes_output(self):
        a = run_synthetic(SynthConfig(runs=30, population_size=100, seed=5))
        b = run_synthetic(SynthConfig(runs=30, population_size=100, seed=6))
        assert a.to_csv() != b.to_csv()

    def test_workers_do_not_change_results(self):
        cfg = SynthConfig(runs=12, population_size=100, seed=2)
        np.testing.assert_array_equal(run_synthetic(cfg).errors, run_synthetic(cfg, workers=2).errors)

    def test_single_item_sequences(self):
        c = run_synthetic(SynthConfig(runs=100, sequence_length=1, population_size=200, seed=3))
        world = c.curve("world")
        assert c.curve("bias") == pytest.approx(world)
        assert c.curve("n_bias") == pytest.approx(world)

    def test_identical_models_are_coin_flips(self):
        runs = 400
        c = run_synthetic(SynthConfig(runs=runs, force_identical=True, population_size=200, seed=4))
        band = 3 * np.sqrt(0.25 / runs)
        np.testing.assert_allclose(c.error_rate[:, -1], 0.5, atol=band)

    def test_share_prior(self):
        c = run_synthetic(SynthConfig(runs=20, population_size=100, share_prior=True, seed=1))
        assert c.error_rate.shape == (6, 10)
