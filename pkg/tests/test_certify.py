import json

import pytest

from emocert.certify import (
    DISCLAIMER,
    CertificationProfile,
    FairnessThresholds,
    KnownLimitation,
    ProfileError,
    ReliabilityThresholds,
    default_profile,
    dimension_verdicts,
    evaluate,
    file_digest,
    load_profile,
    render_report,
)
from emocert.metrics import GroupMetrics, GroupStat, MetricsBundle


def make_bundle(
    accuracy=0.6819,
    confidence=0.787,
    entropy=0.53,
    train_accuracy=0.7875,
    gender=None,
    race=None,
    age=None,
):
    def gm(attr, groups):
        stats = {name: GroupStat(acc, n, n >= 30) for name, (acc, n) in groups.items()}
        included = [s.accuracy for s in stats.values() if s.included]
        gap = max(included) - min(included) if len(included) > 1 else 0.0
        return GroupMetrics(attr, stats, gap, 30)

    per_group = {
        "gender": gm("gender", gender or {"female": (0.6978, 5000), "male": (0.6622, 5000)}),
        "race": gm(
            "race",
            race or {"caucasian": (0.701, 6000), "asian": (0.67375, 2400),
                     "african_american": (0.6225, 1600)},
        ),
        "age_group": gm("age_group", age or {"20-39": (0.69, 5000), "40-69": (0.67, 4000)}),
    }
    return MetricsBundle(
        accuracy=accuracy,
        macro_f1=0.676,
        mean_confidence=confidence,
        mean_entropy=entropy,
        confusion=[[1, 0, 0, 0]] * 4,
        per_group=per_group,
        per_augmentation={"none": accuracy},
        record_count=10_000,
        train_accuracy=train_accuracy,
        train_test_gap=(train_accuracy - accuracy) if train_accuracy is not None else None,
    )


def by_id(results):
    return {r.criterion_id: r for r in results}


def test_enhanced_style_bundle_passes_both_dimensions():
    results = evaluate(default_profile(), make_bundle())
    verdicts = dimension_verdicts(results)
    assert verdicts == {"reliability": "pass", "fairness": "pass"}
    r = by_id(results)
    assert r["reliability.min_test_accuracy"].verdict == "pass"
    assert r["reliability.min_test_accuracy"].observed == pytest.approx(0.6819)


def test_baseline_style_bundle_fails_exactly_three_reliability_criteria():
    # accuracy 0.5388, confidence 0.27, entropy 1.38; small train-test gap
    results = evaluate(
        default_profile(),
        make_bundle(accuracy=0.5388, confidence=0.27, entropy=1.38, train_accuracy=0.55),
    )
    reliability = [r for r in results if r.dimension == "reliability"]
    failing = [r for r in reliability if r.verdict == "fail"]
    assert len(failing) == 3
    assert {r.criterion_id for r in failing} == {
        "reliability.min_test_accuracy",
        "reliability.min_mean_confidence",
        "reliability.max_mean_entropy",
    }
    assert dimension_verdicts(results)["reliability"] == "fail"


def test_missing_train_accuracy_fails_with_reason():
    results = evaluate(default_profile(), make_bundle(train_accuracy=None))
    gap = by_id(results)["reliability.max_train_test_gap"]
    assert gap.verdict == "fail"
    assert "not evaluated" in gap.notes


def test_missing_group_metrics_fail_not_silently_pass():
    bundle = make_bundle()
    del bundle.per_group["race"]
    results = evaluate(default_profile(), bundle)
    race = by_id(results)["fairness.max_gap.race"]
    assert race.verdict == "fail"
    assert "not evaluated" in race.notes


def test_age_exemption_via_known_limitation():
    age = {"20-39": (0.70, 4000), "40-69": (0.69, 3000), "70+": (0.4561, 200)}
    profile = CertificationProfile(
        known_limitations=(KnownLimitation("age_group", "70+", "documented"),)
    )
    results = evaluate(profile, make_bundle(age=age))
    age_result = by_id(results)["fairness.max_gap.age_group"]
    assert age_result.verdict == "exempted"
    assert "70+" in age_result.notes
    assert dimension_verdicts(results)["fairness"] == "pass"


def test_exemption_only_for_exact_match():
    age = {"20-39": (0.70, 4000), "40-69": (0.69, 3000), "70+": (0.4561, 200)}
    profile = CertificationProfile(
        known_limitations=(KnownLimitation("age_group", "0-3", "wrong group"),)
    )
    results = evaluate(profile, make_bundle(age=age))
    assert by_id(results)["fairness.max_gap.age_group"].verdict == "fail"


def test_removing_exemptions_never_increases_passes():
    age = {"20-39": (0.70, 4000), "40-69": (0.69, 3000), "70+": (0.4561, 200)}
    with_exemption = evaluate(
        CertificationProfile(known_limitations=(KnownLimitation("age_group", "70+", "x"),)),
        make_bundle(age=age),
    )
    without = evaluate(CertificationProfile(), make_bundle(age=age))
    passes_with = sum(r.verdict == "pass" for r in with_exemption)
    passes_without = sum(r.verdict == "pass" for r in without)
    assert passes_without <= passes_with + 1  # exempted is not a pass
    assert sum(r.verdict == "fail" for r in without) > sum(
        r.verdict == "fail" for r in with_exemption
    )


def test_threshold_monotonicity():
    bundle = make_bundle(accuracy=0.65)
    low = evaluate(default_profile(), bundle)
    strict_profile = CertificationProfile(
        reliability=ReliabilityThresholds(min_test_accuracy=0.66)
    )
    high = evaluate(strict_profile, bundle)
    assert by_id(low)["reliability.min_test_accuracy"].verdict == "pass"
    assert by_id(high)["reliability.min_test_accuracy"].verdict == "fail"


def test_profile_min_group_n_recomputes_gap_from_counts():
    # the 70+ group is tiny; with the default min_group_n=30 it is excluded
    age = {"20-39": (0.70, 4000), "40-69": (0.69, 3000), "70+": (0.30, 10)}
    results = evaluate(default_profile(), make_bundle(age=age))
    assert by_id(results)["fairness.max_gap.age_group"].verdict == "pass"
    lenient = CertificationProfile(fairness=FairnessThresholds(min_group_n=5))
    results = evaluate(lenient, make_bundle(age=age))
    assert by_id(results)["fairness.max_gap.age_group"].verdict == "fail"


# -- profiles -----------------------------------------------------------------

def test_default_profile_file_roundtrip(tmp_path):
    path = tmp_path / "profile.json"
    path.write_text(json.dumps(default_profile().to_dict(), indent=2))
    profile = load_profile(path)
    assert profile.reliability.min_test_accuracy == 0.60
    assert profile.reliability.min_mean_confidence == 0.50
    assert profile.reliability.max_mean_entropy == 0.90
    assert profile.reliability.max_train_test_gap == 0.15
    assert profile.fairness.max_gap == {"gender": 0.10, "race": 0.10, "age_group": 0.10}
    assert profile.fairness.min_group_n == 30


def test_profile_negative_threshold_rejected(tmp_path):
    path = tmp_path / "neg.json"
    path.write_text(json.dumps({"reliability": {"min_test_accuracy": -0.2}}))
    with pytest.raises(ProfileError, match="non-negative"):
        load_profile(path)


def test_profile_unknown_keys_rejected_strictly(tmp_path):
    path = tmp_path / "unknown.json"
    path.write_text(json.dumps({"reliability": {"min_test_accuraccy": 0.6}}))
    with pytest.raises(ProfileError, match="unknown key"):
        load_profile(path)


def test_profile_lists_all_violations(tmp_path):
    path = tmp_path / "multi.json"
    path.write_text(
        json.dumps(
            {
                "reliability": {"min_test_accuracy": -1, "bogus": 2},
                "fairness": {"max_gap": {"height": 0.1}},
                "extra_top": {},
            }
        )
    )
    with pytest.raises(ProfileError) as err:
        load_profile(path)
    assert len(err.value.problems) >= 4


# -- reports --------------------------------------------------------------------

def test_structured_report_deterministic_with_pinned_timestamp():
    results = evaluate(default_profile(), make_bundle())
    kwargs = dict(
        profile=default_profile(),
        metrics=make_bundle(),
        fmt="structured",
        toolkit_version="0.1.0",
        input_digests={"metrics": "sha256:abc"},
        timestamp="2026-01-01T00:00:00+00:00",
    )
    a = render_report(results, **kwargs)
    b = render_report(results, **kwargs)
    assert a == b
    doc = json.loads(a)
    assert doc["dimensions"] == {"reliability": "pass", "fairness": "pass"}
    assert doc["overall"] == "pass"
    assert doc["disclaimer"] == DISCLAIMER
    assert doc["inputs"]["metrics"] == "sha256:abc"
    assert doc["generated_at"] == "2026-01-01T00:00:00+00:00"


def test_one_reliability_fail_leaves_fairness_unaffected():
    results = evaluate(default_profile(), make_bundle(confidence=0.3))
    verdicts = dimension_verdicts(results)
    assert verdicts == {"reliability": "fail", "fairness": "pass"}


def test_human_readable_report_lists_every_criterion():
    results = evaluate(default_profile(), make_bundle())
    text = render_report(
        results, default_profile(), make_bundle(), fmt="human_readable",
        timestamp="pinned",
    ).decode()
    for r in results:
        assert r.criterion_id in text
    assert "PASS" in text
    assert DISCLAIMER in text


def test_unknown_format_rejected():
    results = evaluate(default_profile(), make_bundle())
    with pytest.raises(ValueError, match="format"):
        render_report(results, default_profile(), make_bundle(), fmt="pdf")


def test_file_digest_stable(tmp_path):
    p = tmp_path / "x"
    p.write_text("hello")
    assert file_digest(p) == file_digest(p)
    assert file_digest(p).startswith("sha256:")
