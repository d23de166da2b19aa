import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from wfdr import (
    BatchFormatError,
    ConfigurationError,
    GaussianComponent,
    GroupSpec,
    HypothesisBatch,
    MixtureModel,
    WeightScheme,
    covariate_weights,
    density,
    generate_batch,
    mixture_density,
    read_batch_csv,
    write_batch_csv,
)

from conftest import mp_normal_pdf


class TestDensity:
    def test_standard_normal_mode(self):
        assert_allclose(density(GaussianComponent(), 0.0), 0.398942, atol=1e-6)

    @pytest.mark.parametrize("x, mean", [(2.73, 0.0), (3.11, 2.0), (0.73, 0.0), (-4.0, 1.5)])
    def test_against_high_precision(self, x, mean):
        assert_allclose(density(GaussianComponent(mean, 1.0), x), mp_normal_pdf(x, mean), rtol=1e-13)

    def test_alternative_at_3_11(self):
        assert_allclose(density(GaussianComponent(2.0, 1.0), 3.11), 0.215458, atol=1e-6)

    def test_non_unit_sd(self):
        assert_allclose(density(GaussianComponent(1.0, 2.5), 0.3), mp_normal_pdf(0.3, 1.0, 2.5), rtol=1e-13)

    def test_array_input(self):
        out = density(GaussianComponent(), np.array([0.0, 1.0]))
        assert out.shape == (2,)

    def test_bad_sd(self):
        with pytest.raises(ConfigurationError):
            GaussianComponent(0.0, 0.0)


class TestMixtureDensity:
    def test_two_component_value(self):
        model = MixtureModel.single(10, 0.2, 2.0)
        expected = 0.8 * mp_normal_pdf(2.73) + 0.2 * mp_normal_pdf(2.73, 2.0)
        assert_allclose(mixture_density(model, 0, 2.73), expected, rtol=1e-13)
        assert_allclose(mixture_density(model, 0, 2.73), 0.068810, atol=1e-6)

    @pytest.mark.parametrize("x", [-2.0, 0.0, 1.3, 4.0])
    def test_degenerate_proportions(self, x):
        null_only = MixtureModel.single(5, 0.0, 2.0)
        alt_only = MixtureModel.single(5, 1.0, 2.0)
        assert mixture_density(null_only, 0, x) == density(GaussianComponent(), x)
        assert mixture_density(alt_only, 0, x) == density(GaussianComponent(2.0), x)

    def test_unknown_group(self):
        with pytest.raises(ConfigurationError):
            mixture_density(MixtureModel.single(5, 0.2, 2.0), 3, 0.0)


class TestGenerateBatch:
    def test_all_null_when_p_zero(self):
        batch = generate_batch(MixtureModel.single(100, 0.0, 2.0), seed=7)
        assert batch.m == 100
        assert not batch.theta.any()

    def test_non_null_fraction(self):
        batch = generate_batch(MixtureModel.single(100_000, 0.2, 2.0), seed=11)
        assert abs(batch.theta.mean() - 0.2) <= 0.005

    def test_fraction_converges_over_replications(self):
        m, reps, p = 2000, 50, 0.3
        model = MixtureModel.single(m, p, 2.0)
        frac = np.mean([generate_batch(model, seed=r).theta.mean() for r in range(reps)])
        assert abs(frac - p) <= 4 * math.sqrt(p * (1 - p) / (m * reps))

    def test_deterministic(self):
        model = MixtureModel((GroupSpec(300, 0.2), GroupSpec(200, 0.1, non_null=GaussianComponent(-2.0))))
        w = WeightScheme("log-normal", {"target": "b", "location": math.log(3), "scale": 1.0})
        assert generate_batch(model, w, 99) == generate_batch(model, w, 99)
        assert generate_batch(model, w, 99) != generate_batch(model, w, 100)

    def test_groups_follow_their_components(self):
        model = MixtureModel((GroupSpec(20_000, 1.0, non_null=GaussianComponent(3.0)),
                              GroupSpec(20_000, 1.0, non_null=GaussianComponent(-3.0))))
        batch = generate_batch(model, seed=3)
        assert_allclose(batch.x[batch.group == 0].mean(), 3.0, atol=0.05)
        assert_allclose(batch.x[batch.group == 1].mean(), -3.0, atol=0.05)

    def test_per_group_ratio_weights(self):
        model = MixtureModel((GroupSpec(30, 0.2), GroupSpec(20, 0.2)))
        batch = generate_batch(model, WeightScheme("per-group-ratio", {"ratios": [3.0, 0.5]}), 1)
        assert_array_equal(batch.a, 1.0)
        assert_allclose(batch.b[batch.group == 0], 1 / 3)
        assert_allclose(batch.b[batch.group == 1], 2.0)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1),
           kind=st.sampled_from(["constant", "per-group-ratio", "log-normal", "covariate-power"]))
    def test_weights_positive(self, seed, kind):
        params = {
            "constant": {"a": 2.0, "b": 0.5},
            "per-group-ratio": {"ratios": [3.0, 0.1]},
            "log-normal": {"target": "a", "location": 0.0, "scale": 3.0},
            "covariate-power": {"exponent": -0.125},
        }[kind]
        model = MixtureModel((GroupSpec(40, 0.2), GroupSpec(40, 0.3)))
        batch = generate_batch(model, WeightScheme(kind, params), seed)
        assert np.all(batch.a > 0) and np.all(batch.b > 0)

    def test_unknown_scheme(self):
        with pytest.raises(ConfigurationError):
            WeightScheme("uniform")


class TestCovariateWeights:
    def test_exponent_zero(self):
        _, _, b = covariate_weights(50, 0.0, seed=1)
        assert_array_equal(b, 1.0)

    def test_relations(self):
        s, p, b = covariate_weights(1000, 0.5, seed=2)
        assert_allclose(p, s / (s + 1))
        assert_allclose(b, np.sqrt(1 + s))

    def test_log_scale_parameters(self):
        s, _, _ = covariate_weights(200_000, 1.0, seed=3)
        assert_allclose(np.log(s).mean(), -1.5, atol=0.01)
        assert_allclose(np.log(s).std(), 1.0, atol=0.01)

    def test_deterministic(self):
        assert_array_equal(covariate_weights(10, 0.5, 4)[0], covariate_weights(10, 0.5, 4)[0])

    def test_bad_m(self):
        with pytest.raises(ConfigurationError):
            covariate_weights(0, 0.5, 1)


class TestBatchValidation:
    def test_defaults(self):
        b = HypothesisBatch(x=[0.1, 0.2])
        assert_array_equal(b.a, 1.0)
        assert_array_equal(b.group, 0)
        assert not b.has_truth()

    @pytest.mark.parametrize("kwargs", [
        {"x": []},
        {"x": [0.0, np.nan]},
        {"x": [0.0, 1.0], "a": [1.0, 0.0]},
        {"x": [0.0, 1.0], "b": [1.0]},
        {"x": [0.0, 1.0], "theta": [0, 2]},
        {"x": [0.0, 1.0], "group": [0, -1]},
    ])
    def test_rejects_bad_input(self, kwargs):
        with pytest.raises(BatchFormatError):
            HypothesisBatch(**kwargs)

    def test_read_only(self):
        b = HypothesisBatch(x=[0.1, 0.2])
        with pytest.raises(ValueError):
            b.x[0] = 5.0


class TestCsv:
    def test_round_trip(self, tmp_path):
        model = MixtureModel((GroupSpec(30, 0.2), GroupSpec(20, 0.4)))
        w = WeightScheme("log-normal", {"target": "b", "location": 1.0, "scale": 1.0})
        batch = generate_batch(model, w, 5)
        path = tmp_path / "batch.csv"
        write_batch_csv(batch, path)
        assert read_batch_csv(path) == batch

    def test_only_x(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("x\n1.5\n-0.25\n")
        batch = read_batch_csv(path)
        assert_array_equal(batch.x, [1.5, -0.25])
        assert_array_equal(batch.b, 1.0)

    @pytest.mark.parametrize("text", ["", "y\n1\n", "x,a\n1.0,\n", "x\nabc\n", "x\n"])
    def test_malformed(self, tmp_path, text):
        path = tmp_path / "bad.csv"
        path.write_text(text)
        with pytest.raises(BatchFormatError):
            read_batch_csv(path)


def test_model_dict_round_trip():
    model = MixtureModel((GroupSpec(3000, 0.2, non_null=GaussianComponent(-3.0)),
                          GroupSpec(1500, 0.1, GaussianComponent(0.0, 1.2), GaussianComponent(2.0))))
    assert MixtureModel.from_dict(model.to_dict()) == model
