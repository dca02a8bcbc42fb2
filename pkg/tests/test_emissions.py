import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carbonsched.emissions import (
    MJ_PER_KWH,
    RunSummary,
    blended_error,
    build_run_summary,
    carbon_emission_efficiency,
    efficiency_comparison,
    grams_per_inference,
    interval_emission,
    quality_improvement,
)
from carbonsched.errors import DataError
from carbonsched.registry import builtin_pool
from helpers import interval

RESNET = builtin_pool("resnet")
R34 = RESNET.get("ResNet34")
R50 = RESNET.get("ResNet50")
R101 = RESNET.get("ResNet101")
R152 = RESNET.get("ResNet152")


# ------------------------------------------------------ grams_per_inference


def test_unit_identity_one_kwh_at_unit_intensity_is_one_gram():
    assert grams_per_inference(3.6e9, 1.0) == 1.0
    assert MJ_PER_KWH == 3.6e9


def test_zero_intensity_emits_nothing():
    assert grams_per_inference(420.6213298, 0.0) == 0.0


def test_resnet50_at_171_grams():
    # 420.6213298 * 171 / 3.6e9
    assert grams_per_inference(420.6213298, 171) == pytest.approx(
        1.99795131655e-5, rel=1e-9
    )


@given(
    energy=st.floats(1e-3, 1e10),
    intensity=st.floats(0, 1e4),
    factor=st.floats(1e-3, 1e3),
)
@settings(max_examples=300)
def test_grams_linear_in_both_arguments(energy, intensity, factor):
    base = grams_per_inference(energy, intensity)
    assert grams_per_inference(energy * factor, intensity) == pytest.approx(
        base * factor, rel=1e-12
    )
    assert grams_per_inference(energy, intensity * factor) == pytest.approx(
        base * factor, rel=1e-12
    )


# -------------------------------------------------------- interval_emission


def test_interval_emission_zero_count():
    emission = interval_emission(0, R50, 171, interval(0, 30))
    assert emission.carbon_g == 0.0
    assert emission.energy_mj_total == 0.0


def test_interval_emission_million_resnet50():
    emission = interval_emission(1_000_000, R50, 171, interval(0, 30))
    assert emission.carbon_g == pytest.approx(19.9795131655, rel=1e-9)
    assert emission.model == "ResNet50"


def test_interval_emission_million_resnet152():
    emission = interval_emission(1_000_000, R152, 171, interval(0, 30))
    assert emission.carbon_g == pytest.approx(58.81199143, rel=1e-9)


def test_interval_emission_rejects_negative_count():
    with pytest.raises(DataError):
        interval_emission(-1, R50, 171, interval(0, 30))


@given(count=st.integers(0, 10_000), intensity=st.floats(0, 1000))
@settings(max_examples=200)
def test_interval_emission_linear_in_count_and_intensity(count, intensity):
    base = interval_emission(count, R101, intensity, interval(0, 30))
    doubled_count = interval_emission(2 * count, R101, intensity, interval(0, 30))
    doubled_intensity = interval_emission(count, R101, 2 * intensity, interval(0, 30))
    assert doubled_count.carbon_g == pytest.approx(2 * base.carbon_g, abs=1e-18, rel=1e-12)
    assert doubled_intensity.carbon_g == pytest.approx(2 * base.carbon_g, abs=1e-18, rel=1e-12)


# ------------------------------------------------------------ blended_error


def test_blended_error_single_model_is_exactly_its_rate():
    assert blended_error([(100, R101), (3, R101)]) == 6.454


def test_blended_error_equal_split():
    assert blended_error([(5, R50), (5, R101)]) == pytest.approx(6.796, rel=1e-12)


def test_blended_error_three_to_one_split():
    # (3*8.58 + 1*5.954) / 4
    assert blended_error([(3, R34), (1, R152)]) == pytest.approx(7.9235, rel=1e-12)


def test_blended_error_zero_total_rejected():
    with pytest.raises(DataError, match="zero total requests"):
        blended_error([(0, R34)])


@given(
    counts=st.lists(st.integers(0, 10_000), min_size=1, max_size=8),
)
@settings(max_examples=200)
def test_blended_error_within_min_max_of_used_models(counts):
    profiles = [RESNET.profiles[i % 4] for i in range(len(counts))]
    pairs = [(c, p) for c, p in zip(counts, profiles)]
    if sum(counts) == 0:
        return
    blended = blended_error(pairs)
    used = [p.error_rate_pct for c, p in pairs if c > 0]
    assert min(used) - 1e-12 <= blended <= max(used) + 1e-12


# ------------------------------------------------------ quality_improvement


def test_quality_improvement_resnet101_over_resnet50():
    assert quality_improvement(7.138, 6.454) == pytest.approx(9.5825, abs=0.001)


def test_quality_improvement_resnet152_over_resnet50():
    assert quality_improvement(7.138, 5.954) == pytest.approx(16.5873, abs=0.001)


def test_quality_improvement_blended_over_resnet50():
    assert quality_improvement(7.138, 6.57) == pytest.approx(7.9574, abs=0.001)


def test_quality_improvement_is_zero_for_equal_rates_and_signed():
    assert quality_improvement(7.138, 7.138) == 0.0
    assert quality_improvement(5.0, 6.0) < 0
    assert quality_improvement(5.0, 4.0) > 0


def test_quality_improvement_rejects_zero_baseline():
    with pytest.raises(DataError):
        quality_improvement(0.0, 5.0)


# ----------------------------------------------------------- CEE


def _summary(policy, carbon_g, error_pct):
    return RunSummary(
        policy=policy,
        total_carbon_g=carbon_g,
        total_requests=1,
        blended_error_pct=error_pct,
        per_interval=(),
    )


def test_cee_fixed_resnet152_case():
    comparison = carbon_emission_efficiency(
        _summary("ResNet50", 0.0, 7.138), _summary("ResNet152", 5720.0, 5.954)
    )
    assert comparison.cee == pytest.approx(0.0029, abs=1e-4)
    assert comparison.delta_carbon_g == 5720.0


def test_cee_heuristic_case():
    comparison = carbon_emission_efficiency(
        _summary("ResNet50", 0.0, 7.138), _summary("heuristic", 1532.0, 6.57)
    )
    assert comparison.cee == pytest.approx(0.00522, abs=1e-4)


def test_cee_undefined_for_identical_carbon():
    comparison = carbon_emission_efficiency(
        _summary("a", 100.0, 7.0), _summary("b", 100.0, 6.0)
    )
    assert comparison.cee is None


def test_cee_sign_convention():
    worse_quality_more_carbon = efficiency_comparison("b", "c", 5.0, 6.0, 0.0, 10.0)
    assert worse_quality_more_carbon.cee < 0
    better_quality_more_carbon = efficiency_comparison("b", "c", 6.0, 5.0, 0.0, 10.0)
    assert better_quality_more_carbon.cee > 0


# ----------------------------------------------------------- RunSummary


def test_build_run_summary_totals_and_serialization():
    emissions = (
        interval_emission(10, R50, 100, interval(0, 30)),
        interval_emission(20, R101, 200, interval(30, 60)),
    )
    summary = build_run_summary("mixed", emissions, RESNET)
    assert summary.total_requests == 30
    assert summary.total_carbon_g == pytest.approx(
        math.fsum(e.carbon_g for e in emissions), rel=1e-15
    )
    assert (
        min(R50.error_rate_pct, R101.error_rate_pct)
        <= summary.blended_error_pct
        <= max(R50.error_rate_pct, R101.error_rate_pct)
    )
    doc = json.loads(summary.to_json())
    assert doc["policy"] == "mixed"
    assert doc["total_requests"] == 30
    assert len(doc["per_interval"]) == 2
    assert doc["per_interval"][0]["interval"]["start"] == "2023-06-01T00:00:00Z"
    csv_text = summary.to_csv()
    assert csv_text.splitlines()[0] == (
        "start_utc,end_utc,model,count,energy_mj_total,carbon_g"
    )
    assert len(csv_text.splitlines()) == 3


def test_total_carbon_matches_compensated_sum():
    emissions = [
        interval_emission(i % 7, RESNET.profiles[i % 4], 50 + i, interval(i, i + 1))
        for i in range(500)
    ]
    summary = build_run_summary("many", emissions, RESNET)
    expected = math.fsum(e.carbon_g for e in emissions)
    assert summary.total_carbon_g == pytest.approx(expected, rel=1e-9)
