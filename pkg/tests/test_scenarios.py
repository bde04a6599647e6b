import math
from fractions import Fraction

import numpy as np
import pytest

from bellsim.core import (
    DiscreteDistribution,
    ExperimentModel,
    ModelVariant,
    SettingPair,
    enumerate_postselected,
    enumerate_raw,
    simulate_trials,
    validate_model,
)
from bellsim.coupling import joint_moments, lf_coupling
from bellsim.errors import ConstructionInvalid
from bellsim.scenarios import (
    CANONICAL_ANGLES,
    Scenario,
    build_scenario,
    lf_scenario,
    lhvm_socks_scenario,
    m2_demo_scenario,
    m3_demo_scenario,
    quantum_scenario,
    scenario_names,
)

from helpers import brute_force_expectations, mc_tolerance, sample_standard_error


@pytest.mark.parametrize("name", scenario_names())
def test_scenario_verifies_and_validates(name):
    scenario = build_scenario(name)
    assert validate_model(scenario.model) == []
    scenario.verify()


@pytest.mark.parametrize("name", scenario_names())
def test_monte_carlo_agrees_with_expected_tables(name):
    scenario = build_scenario(name)
    for sp in scenario.model.pairs():
        a, b = simulate_trials(scenario.model, sp, 20_000, 555)
        keep = (a != 0) & (b != 0)
        prod = (a[keep] * b[keep]).astype(float)
        want = float(scenario.expected_postselected[sp].e_ab)
        assert abs(prod.mean() - want) <= mc_tolerance(sample_standard_error(prod))
        c = keep.astype(float)
        want_c = float(scenario.expected_postselected[sp].c_xy)
        assert abs(c.mean() - want_c) <= mc_tolerance(sample_standard_error(c))


def test_verify_catches_corrupted_expectations():
    good = lf_scenario()
    bad_table = dict(good.expected_raw)
    bad_table[SettingPair(1, 1)] = bad_table[SettingPair(1, 1)].__class__(
        e_ab=Fraction(1, 2), e_a=Fraction(1), e_b=Fraction(1), c_xy=Fraction(1))
    corrupted = Scenario(
        name=good.name, description=good.description, model=good.model,
        expected_raw=bad_table, expected_postselected=good.expected_postselected,
        s_max_abs_raw=good.s_max_abs_raw,
        s_max_abs_postselected=good.s_max_abs_postselected)
    with pytest.raises(ConstructionInvalid):
        corrupted.verify()


class TestLf:
    def test_postselected_corner_values(self):
        model = lf_scenario().model
        assert enumerate_postselected(model, SettingPair(1, 1)).e_ab == 1
        assert enumerate_postselected(model, SettingPair(-1, -1)).e_ab == -1
        assert enumerate_postselected(model, SettingPair(1, -1)).e_ab == 0
        assert enumerate_postselected(model, SettingPair(-1, 1)).e_ab == 0

    def test_pushforward_equals_coupling_distribution(self):
        # Push the scenario's source through the four per-setting responses
        # and compare with the explicit coupling construction.
        scenario = lf_scenario()
        model = scenario.model
        weights = {}
        for (l1, l2), p in model.source.items():
            quad = (model.responses_a[1](l1, 0), model.responses_a[-1](l1, 0),
                    model.responses_b[1](l2, 0), model.responses_b[-1](l2, 0))
            weights[quad] = weights.get(quad, Fraction(0)) + p
        coupling = dict(lf_coupling().items())
        assert weights == coupling

    def test_coupling_moments_match_scenario_table(self):
        spec = joint_moments(lf_coupling(), (1, -1), (1, -1))
        table = lf_scenario().expected_postselected
        for sp in spec.pairs():
            assert spec.e_ab[sp] == table[sp].e_ab
            assert spec.e_a[sp] == table[sp].e_a
            assert spec.e_b[sp] == table[sp].e_b


class TestSocks:
    def test_perfect_correlation_identity_responses(self):
        scenario = lhvm_socks_scenario(1)
        for sp in scenario.model.pairs():
            assert enumerate_raw(scenario.model, sp).e_ab == 1
        assert scenario.s_max_abs_raw == 2
        scenario.verify()

    def test_half_correlation_with_flip_matches_brute_force(self):
        scenario = lhvm_socks_scenario(Fraction(1, 2), flip_b2=True)
        for sp in scenario.model.pairs():
            oracle = brute_force_expectations(scenario.model, sp)
            got = enumerate_raw(scenario.model, sp)
            assert float(got.e_ab) == pytest.approx(oracle["raw"][0], abs=1e-12)
        assert scenario.s_max_abs_postselected == 0

    @pytest.mark.parametrize("p_same", [0, Fraction(1, 3), Fraction(3, 4), 1])
    def test_any_knob_respects_chsh_and_no_signalling(self, p_same):
        scenario = lhvm_socks_scenario(p_same, flip_b2=True)
        scenario.verify()
        assert scenario.s_max_abs_raw <= 2


class TestM2Demo:
    def test_raw_table_classical_postselected_extremal(self):
        scenario = m2_demo_scenario()
        assert scenario.s_max_abs_raw <= 2
        assert scenario.s_max_abs_postselected == 4

    def test_postselected_marginals_depend_on_remote_setting(self):
        scenario = m2_demo_scenario()
        table = scenario.expected_postselected
        assert table[SettingPair(1, 1)].e_a != table[SettingPair(1, 2)].e_a

    def test_detection_rates_positive_and_below_one(self):
        scenario = m2_demo_scenario()
        for sp, r in scenario.expected_postselected.items():
            assert 0 < r.c_xy < 1


class TestM3Demo:
    def test_joints_are_not_products(self):
        model = m3_demo_scenario().model
        for sp, joint in model.instruments_joint.items():
            marg_x = {}
            marg_y = {}
            for (lx, ly), p in joint.items():
                marg_x[lx] = marg_x.get(lx, Fraction(0)) + p
                marg_y[ly] = marg_y.get(ly, Fraction(0)) + p
            product_weight = {
                (lx, ly): marg_x[lx] * marg_y[ly] for lx in marg_x for ly in marg_y}
            joint_weight = {atom: p for atom, p in joint.items()}
            assert any(product_weight.get(k, Fraction(0)) != v
                       for k, v in joint_weight.items())

    def test_joint_marginals_uniform_across_pairs(self):
        model = m3_demo_scenario().model
        for joint in model.instruments_joint.values():
            for component in (0, 1):
                marg = {}
                for atom, p in joint.items():
                    marg[atom[component]] = marg.get(atom[component], Fraction(0)) + p
                assert marg == {0: Fraction(1, 2), 1: Fraction(1, 2)}

    def test_product_form_joint_reduces_to_independent_model(self):
        # The same responses with a product joint must reproduce the plain
        # per-station-instrument model exactly.
        m3 = m3_demo_scenario().model
        half = Fraction(1, 2)
        product_joint = DiscreteDistribution(
            ((0, 0), (0, 1), (1, 0), (1, 1)), (Fraction(1, 4),) * 4)
        as_m3 = ExperimentModel.correlated_instruments_model(
            m3.settings_a, m3.settings_b, m3.source,
            {sp: product_joint for sp in m3.pairs()},
            m3.responses_a, m3.responses_b)
        uniform = DiscreteDistribution((0, 1), (half, half))
        as_m1 = ExperimentModel.product_model(
            ModelVariant.M1, m3.settings_a, m3.settings_b, m3.source,
            {s: uniform for s in m3.settings_a}, {s: uniform for s in m3.settings_b},
            m3.responses_a, m3.responses_b)
        for sp in m3.pairs():
            assert enumerate_raw(as_m3, sp) == enumerate_raw(as_m1, sp)

    def test_correlators_reach_four(self):
        scenario = m3_demo_scenario()
        assert scenario.s_max_abs_raw == 4
        assert all(r.c_xy == 1 for r in scenario.expected_raw.values())


class TestQuantum:
    def test_equal_angles_give_unit_correlators(self):
        scenario = quantum_scenario((0.3, 0.3, 0.3, 0.3))
        for r in scenario.expected_raw.values():
            assert float(r.e_ab) == pytest.approx(1.0)
        assert float(scenario.s_max_abs_raw) == pytest.approx(2.0)

    def test_canonical_angles_reach_tsirelson(self):
        scenario = quantum_scenario(CANONICAL_ANGLES)
        assert float(scenario.s_max_abs_raw) == pytest.approx(2 * math.sqrt(2), abs=1e-12)

    def test_orthogonal_pair_anticorrelates(self):
        scenario = quantum_scenario((0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 8))
        assert float(scenario.expected_raw[SettingPair(1, 1)].e_ab) == pytest.approx(-1.0)
