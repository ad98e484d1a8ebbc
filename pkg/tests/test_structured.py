import numpy as np
import pytest

from causaltext.structured import (
    EmptyStratumError,
    StructuredParams,
    draw_structured,
    draw_structured_arrays,
    identification_ate,
    joint_distribution,
    naive_adjusted_ate,
    oracle_ate,
    plug_in_ate,
    sample_structured_params,
)

from .conftest import enumerate_joint_ate


def make_params(p_c=0.5, p_u=(0.5, 0.5), p_a=((0.5, 0.5), (0.5, 0.5)),
                p_y=(((0.5,) * 2,) * 2, ((0.5,) * 2,) * 2)):
    return StructuredParams(
        p_c=p_c,
        p_u_given_c=np.array(p_u),
        p_a_given_cu=np.array(p_a),
        p_y_given_acu=np.array(p_y),
    )


class TestOracleAte:
    def test_no_treatment_effect(self):
        params = make_params()
        assert oracle_ate(params) == 0.0

    def test_hand_built_uplift(self):
        params = make_params(p_y=(((0.5, 0.5), (0.5, 0.5)), ((0.6, 0.6), (0.6, 0.6))))
        assert oracle_ate(params) == pytest.approx(0.1)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_sampled_params_hit_target(self, seed):
        params = sample_structured_params(seed)
        assert abs(oracle_ate(params) - 0.1) <= 1e-6

    def test_matches_joint_enumeration(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            vals = 0.05 + 0.9 * rng.random(15)
            params = StructuredParams(
                p_c=vals[0], p_u_given_c=vals[1:3],
                p_a_given_cu=vals[3:7].reshape(2, 2),
                p_y_given_acu=vals[7:15].reshape(2, 2, 2),
            )
            joint = joint_distribution(params)
            assert oracle_ate(params) == pytest.approx(enumerate_joint_ate(joint), abs=1e-12)


class TestNaiveAdjustedAte:
    def test_equals_oracle_without_latent_confounding(self):
        # U influences nothing downstream, so skipping it changes nothing
        params = make_params(
            p_u=(0.3, 0.7),
            p_a=((0.4, 0.4), (0.6, 0.6)),
            p_y=(((0.2, 0.2), (0.3, 0.3)), ((0.5, 0.5), (0.7, 0.7))),
        )
        assert naive_adjusted_ate(params) == pytest.approx(oracle_ate(params), abs=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_sampled_params_show_reversal(self, seed):
        params = sample_structured_params(seed)
        assert abs(naive_adjusted_ate(params) + 0.1) <= 1e-6

    def test_matches_exhaustive_joint_reconstruction(self):
        # marginalize the 16-cell joint directly, no conditional algebra
        rng = np.random.default_rng(3)
        vals = 0.05 + 0.9 * rng.random(15)
        params = StructuredParams(
            p_c=vals[0], p_u_given_c=vals[1:3],
            p_a_given_cu=vals[3:7].reshape(2, 2),
            p_y_given_acu=vals[7:15].reshape(2, 2, 2),
        )
        joint = joint_distribution(params)
        expected = 0.0
        for c in range(2):
            p_c = joint[c].sum()
            per_a = []
            for a in range(2):
                mass = joint[c, :, a, :].sum()
                y1 = joint[c, :, a, 1].sum()
                per_a.append(y1 / mass)
            expected += (per_a[1] - per_a[0]) * p_c
        assert naive_adjusted_ate(params) == pytest.approx(expected, abs=1e-12)


class TestSampleStructuredParams:
    def test_u_marginal_balanced(self):
        for seed in range(4):
            assert abs(sample_structured_params(seed).u_marginal() - 0.5) <= 1e-12

    def test_bit_identical_rerun(self):
        assert sample_structured_params(5).to_text() == sample_structured_params(5).to_text()

    def test_distinct_seeds_distinct_params(self):
        texts = {sample_structured_params(seed).to_text() for seed in range(4)}
        assert len(texts) == 4

    def test_u_marginal_monte_carlo(self):
        params = sample_structured_params(0)
        _, u, _, _ = draw_structured_arrays(params, 1_000_000, seed=42)
        assert abs(u.mean() - 0.5) <= 0.002

    def test_rejects_bad_tol(self):
        with pytest.raises(ValueError):
            sample_structured_params(0, tol=0.0)

    def test_constraint_report(self):
        report = sample_structured_params(1).constraint_report()
        assert all(entry["ok"] for entry in report.values())


class TestDrawStructured:
    def test_empty(self):
        assert draw_structured(sample_structured_params(0), 0, seed=1) == []

    def test_u_frequency(self, params0):
        samples = draw_structured(params0, 10000, seed=5)
        u = np.array([s.u for s in samples])
        assert abs(u.mean() - 0.5) <= 0.015

    def test_conditional_outcome_means(self, params0):
        c, u, a, y = draw_structured_arrays(params0, 10000, seed=6)
        for ai in range(2):
            for ci in range(2):
                for ui in range(2):
                    mask = (a == ai) & (c == ci) & (u == ui)
                    if mask.sum() < 50:
                        continue
                    assert abs(y[mask].mean() - params0.p_y_given_acu[ai, ci, ui]) <= 0.05

    def test_record_i_depends_only_on_seed_and_i(self, params0):
        c1, u1, a1, y1 = draw_structured_arrays(params0, 100, seed=9)
        c2, u2, a2, y2 = draw_structured_arrays(params0, 60, seed=9)
        assert np.array_equal(c1[:60], c2)
        assert np.array_equal(y1[:60], y2)


class TestPlugInAte:
    def test_exact_frequencies_recover_oracle(self, params0):
        joint = joint_distribution(params0)
        cells = np.array([[c, u, a, y] for c in range(2) for u in range(2)
                          for a in range(2) for y in range(2)])
        weights = np.array([joint[c, u, a, y] for c, u, a, y in cells])
        assert plug_in_ate(cells, weights) == pytest.approx(oracle_ate(params0), abs=1e-12)

    def test_monte_carlo_convergence(self, params0):
        samples = draw_structured(params0, 5000, seed=21)
        assert abs(plug_in_ate(samples) - oracle_ate(params0)) <= 0.05

    def test_small_sample_error_magnitude(self, params0):
        errors = []
        for rep in range(30):
            c, u, a, y = draw_structured_arrays(params0, 50, seed=300 + rep)
            try:
                est = plug_in_ate(np.stack([c, u, a, y], axis=1))
            except EmptyStratumError:
                continue
            errors.append(abs(est - oracle_ate(params0)))
        assert 0.1 <= np.mean(errors) <= 0.5

    def test_degenerate_treatment_column(self):
        cells = np.array([[0, 0, 1, 0], [0, 0, 1, 1], [1, 1, 1, 1], [1, 1, 1, 0]])
        with pytest.raises(EmptyStratumError) as err:
            plug_in_ate(cells)
        assert err.value.stratum[0] == 0  # the missing arm is named


class TestIdentificationAte:
    def test_pooling_counts_empty_strata(self, params0):
        joint = joint_distribution(params0)
        joint = joint.copy()
        joint[0, 0, 1, :] = 0.0  # empty (a=1, c=0, u=0)
        with pytest.raises(EmptyStratumError):
            identification_ate(joint)
        est, pooled = identification_ate(joint, pool_empty_strata=True)
        assert pooled == 1
        assert np.isfinite(est)

    def test_rejects_negative_joint(self):
        joint = np.full((2, 2, 2, 2), 1 / 16.0)
        joint[0, 0, 0, 0] = -0.01
        with pytest.raises(ValueError):
            identification_ate(joint)


class TestSerialization:
    def test_round_trip_exact(self):
        params = sample_structured_params(2)
        again = StructuredParams.from_text(params.to_text())
        assert again.to_text() == params.to_text()
        assert again.seed == params.seed
        assert oracle_ate(again) == oracle_ate(params)

    def test_rejects_boundary_probabilities(self):
        with pytest.raises(ValueError):
            make_params(p_c=1.0)
