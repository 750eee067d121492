"""Threshold-based conformity evaluation and report rendering.

A certification profile groups quantitative criteria into two dimensions:

    reliability  minimum test accuracy and mean confidence, maximum mean
                 predictive entropy (nats) and train-test accuracy gap
    fairness     maximum demographic accuracy gap per attribute, with a
                 minimum group size for gap eligibility

A criterion whose metric is missing from the bundle fails with the reason
recorded; it never passes silently.  Known limitations exempt exactly
matching (attribute, group) pairs: when a fairness gap is driven by an
exempted group, the gap is recomputed without it and the criterion is
reported as exempted rather than passed.  A dimension passes when all its
non-exempted criteria pass.

Reports are deterministic byte-for-byte given the same inputs and a pinned
timestamp, and embed content digests of the metrics and profile files so
every verdict is traceable to exact inputs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from emocert.metrics import GROUP_ATTRIBUTES, MetricsBundle

DIMENSIONS = ("reliability", "fairness")

DISCLAIMER = (
    "This report is a self-assessment generated by the system's own toolkit "
    "against a configurable criteria profile. It is not an independent "
    "third-party audit or a conformity assessment against any harmonized "
    "standard, and it does not establish compliance with any legal or "
    "regulatory requirement."
)


class ProfileError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid certification profile:\n  " + "\n  ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class ReliabilityThresholds:
    min_test_accuracy: float = 0.60
    min_mean_confidence: float = 0.50
    max_mean_entropy: float = 0.90  # nats
    max_train_test_gap: float = 0.15


@dataclass(frozen=True)
class FairnessThresholds:
    max_gap: dict[str, float] = field(
        default_factory=lambda: {attr: 0.10 for attr in GROUP_ATTRIBUTES}
    )
    min_group_n: int = 30


@dataclass(frozen=True)
class KnownLimitation:
    attribute: str
    group: str
    rationale: str


@dataclass(frozen=True)
class CertificationProfile:
    reliability: ReliabilityThresholds = field(default_factory=ReliabilityThresholds)
    fairness: FairnessThresholds = field(default_factory=FairnessThresholds)
    known_limitations: tuple[KnownLimitation, ...] = ()

    def to_dict(self) -> dict:
        return {
            "reliability": {
                "min_test_accuracy": self.reliability.min_test_accuracy,
                "min_mean_confidence": self.reliability.min_mean_confidence,
                "max_mean_entropy": self.reliability.max_mean_entropy,
                "max_train_test_gap": self.reliability.max_train_test_gap,
            },
            "fairness": {
                "max_gap": dict(self.fairness.max_gap),
                "min_group_n": self.fairness.min_group_n,
            },
            "known_limitations": [
                {"attribute": k.attribute, "group": k.group, "rationale": k.rationale}
                for k in self.known_limitations
            ],
        }


def default_profile() -> CertificationProfile:
    return CertificationProfile()


def _parse_profile(data: dict) -> CertificationProfile:
    problems: list[str] = []
    if not isinstance(data, dict):
        raise ProfileError(["profile must be a JSON object"])
    unknown = set(data) - {"reliability", "fairness", "known_limitations"}
    for key in sorted(unknown):
        problems.append(f"unknown top-level key {key!r}")

    rel_defaults = ReliabilityThresholds()
    rel_in = data.get("reliability", {})
    rel_values = {}
    if isinstance(rel_in, dict):
        for key in sorted(set(rel_in) - set(vars(rel_defaults))):
            problems.append(f"reliability: unknown key {key!r}")
        for name, default in vars(rel_defaults).items():
            value = rel_in.get(name, default)
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
                problems.append(f"reliability.{name}: must be a non-negative number, got {value!r}")
                value = default
            rel_values[name] = float(value)
        for name in ("min_test_accuracy", "min_mean_confidence", "max_train_test_gap"):
            if rel_values[name] > 1:
                problems.append(f"reliability.{name}: must be <= 1, got {rel_values[name]}")
    else:
        problems.append("reliability: must be an object")
        rel_values = vars(rel_defaults)

    fair_in = data.get("fairness", {})
    max_gap = {attr: 0.10 for attr in GROUP_ATTRIBUTES}
    min_group_n = 30
    if isinstance(fair_in, dict):
        for key in sorted(set(fair_in) - {"max_gap", "min_group_n"}):
            problems.append(f"fairness: unknown key {key!r}")
        gaps_in = fair_in.get("max_gap", max_gap)
        if isinstance(gaps_in, dict):
            for attr in sorted(set(gaps_in) - set(GROUP_ATTRIBUTES)):
                problems.append(f"fairness.max_gap: unknown attribute {attr!r}")
            for attr in GROUP_ATTRIBUTES:
                value = gaps_in.get(attr, max_gap[attr])
                if not isinstance(value, (int, float)) or isinstance(value, bool) or not 0 <= value <= 1:
                    problems.append(f"fairness.max_gap.{attr}: must be in [0, 1], got {value!r}")
                else:
                    max_gap[attr] = float(value)
        else:
            problems.append("fairness.max_gap: must be an object mapping attribute to bound")
        n_in = fair_in.get("min_group_n", min_group_n)
        if not isinstance(n_in, int) or isinstance(n_in, bool) or n_in < 1:
            problems.append(f"fairness.min_group_n: must be a positive integer, got {n_in!r}")
        else:
            min_group_n = n_in
    else:
        problems.append("fairness: must be an object")

    limitations = []
    lims_in = data.get("known_limitations", [])
    if isinstance(lims_in, list):
        for i, lim in enumerate(lims_in):
            if not isinstance(lim, dict) or set(lim) != {"attribute", "group", "rationale"}:
                problems.append(
                    f"known_limitations[{i}]: must have exactly attribute, group, rationale"
                )
                continue
            if lim["attribute"] not in GROUP_ATTRIBUTES:
                problems.append(f"known_limitations[{i}]: unknown attribute {lim['attribute']!r}")
                continue
            limitations.append(KnownLimitation(lim["attribute"], lim["group"], lim["rationale"]))
    else:
        problems.append("known_limitations: must be a list")

    if problems:
        raise ProfileError(problems)
    return CertificationProfile(
        reliability=ReliabilityThresholds(**rel_values),
        fairness=FairnessThresholds(max_gap=max_gap, min_group_n=min_group_n),
        known_limitations=tuple(limitations),
    )


def load_profile(path: str | Path) -> CertificationProfile:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ProfileError([f"not valid JSON: {exc.msg} (line {exc.lineno})"]) from exc
    return _parse_profile(data)


@dataclass
class CriterionResult:
    criterion_id: str
    dimension: str
    observed: float | None
    threshold: float
    comparator: str  # ">=" or "<="
    verdict: str  # "pass" | "fail" | "exempted"
    evidence: str  # metric path inside the bundle
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "criterion_id": self.criterion_id,
            "dimension": self.dimension,
            "observed": self.observed,
            "threshold": self.threshold,
            "comparator": self.comparator,
            "verdict": self.verdict,
            "evidence": self.evidence,
            "notes": self.notes,
        }


def _threshold_result(criterion_id, dimension, observed, threshold, comparator, evidence, missing=""):
    if observed is None:
        return CriterionResult(
            criterion_id, dimension, None, threshold, comparator, "fail", evidence,
            notes=f"not evaluated: {missing or 'metric missing from bundle'}",
        )
    ok = observed >= threshold if comparator == ">=" else observed <= threshold
    return CriterionResult(
        criterion_id, dimension, observed, threshold, comparator,
        "pass" if ok else "fail", evidence,
    )


def _fairness_result(attr, bound, bundle_metrics, profile: CertificationProfile) -> CriterionResult:
    criterion_id = f"fairness.max_gap.{attr}"
    evidence = f"per_group.{attr}.max_gap"
    gm = bundle_metrics.per_group.get(attr)
    if gm is None:
        return _threshold_result(criterion_id, "fairness", None, bound, "<=", evidence,
                                 missing=f"per_group.{attr} missing from bundle")
    exempt = {k.group for k in profile.known_limitations if k.attribute == attr}
    eligible = {
        name: g.accuracy
        for name, g in gm.groups.items()
        if g.count >= profile.fairness.min_group_n
    }
    if not eligible:
        return _threshold_result(criterion_id, "fairness", None, bound, "<=", evidence,
                                 missing=f"no {attr} group reaches min_group_n")
    gap = max(eligible.values()) - min(eligible.values()) if len(eligible) > 1 else 0.0
    if gap <= bound:
        return CriterionResult(criterion_id, "fairness", gap, bound, "<=", "pass", evidence)
    # the gap fails: exclude exempted worst groups one at a time and retry
    excluded = []
    remaining = dict(eligible)
    while len(remaining) > 1:
        worst = min(remaining, key=lambda g: (remaining[g], g))
        current = max(remaining.values()) - min(remaining.values())
        if current <= bound:
            break
        if worst not in exempt:
            return CriterionResult(
                criterion_id, "fairness", gap, bound, "<=", "fail", evidence,
                notes=f"worst group {worst!r} is not a known limitation",
            )
        excluded.append(worst)
        del remaining[worst]
    final_gap = (
        max(remaining.values()) - min(remaining.values()) if len(remaining) > 1 else 0.0
    )
    if final_gap <= bound:
        return CriterionResult(
            criterion_id, "fairness", gap, bound, "<=", "exempted", evidence,
            notes=f"known limitation: excluded group(s) {excluded}; residual gap {final_gap:.4f}",
        )
    return CriterionResult(
        criterion_id, "fairness", gap, bound, "<=", "fail", evidence,
        notes=f"gap persists after excluding exempted group(s) {excluded}",
    )


def evaluate(profile: CertificationProfile, metrics: MetricsBundle) -> list[CriterionResult]:
    """One result per criterion; failures are results, never exceptions."""
    rel = profile.reliability
    results = [
        _threshold_result("reliability.min_test_accuracy", "reliability",
                          metrics.accuracy, rel.min_test_accuracy, ">=", "accuracy"),
        _threshold_result("reliability.min_mean_confidence", "reliability",
                          metrics.mean_confidence, rel.min_mean_confidence, ">=", "mean_confidence"),
        _threshold_result("reliability.max_mean_entropy", "reliability",
                          metrics.mean_entropy, rel.max_mean_entropy, "<=", "mean_entropy"),
        _threshold_result("reliability.max_train_test_gap", "reliability",
                          metrics.train_test_gap, rel.max_train_test_gap, "<=", "train_test_gap",
                          missing="train_accuracy was not provided"),
    ]
    for attr in GROUP_ATTRIBUTES:
        bound = profile.fairness.max_gap.get(attr)
        if bound is None:
            continue
        results.append(_fairness_result(attr, bound, metrics, profile))
    return results


def dimension_verdicts(results: list[CriterionResult]) -> dict[str, str]:
    """pass iff every non-exempted criterion of the dimension passes."""
    verdicts = {}
    for dim in DIMENSIONS:
        relevant = [r for r in results if r.dimension == dim and r.verdict != "exempted"]
        verdicts[dim] = "pass" if all(r.verdict == "pass" for r in relevant) else "fail"
    return verdicts


def file_digest(path: str | Path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def render_report(
    results: list[CriterionResult],
    profile: CertificationProfile,
    metrics: MetricsBundle,
    fmt: str = "structured",
    toolkit_version: str = "0",
    input_digests: dict[str, str] | None = None,
    timestamp: str | None = None,
) -> bytes:
    """Render a conformity report; byte-identical for identical inputs and
    a pinned timestamp.  fmt is "structured" (JSON) or "human_readable"."""
    if not results:
        raise ValueError("no criterion results to render")
    if fmt not in ("structured", "human_readable"):
        raise ValueError(f"unknown report format {fmt!r}")
    verdicts = dimension_verdicts(results)
    overall = "pass" if all(v == "pass" for v in verdicts.values()) else "fail"
    stamp = timestamp if timestamp is not None else datetime.now(timezone.utc).isoformat()
    if fmt == "structured":
        doc = {
            "report_schema": 1,
            "toolkit_version": toolkit_version,
            "generated_at": stamp,
            "inputs": dict(input_digests or {}),
            "profile": profile.to_dict(),
            "metrics": metrics.to_dict(),
            "criteria": [r.to_dict() for r in results],
            "dimensions": verdicts,
            "overall": overall,
            "disclaimer": DISCLAIMER,
        }
        return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")

    width = max(len(r.criterion_id) for r in results)
    lines = [
        "CONFORMITY REPORT",
        "=================",
        f"generated_at: {stamp}",
        f"toolkit_version: {toolkit_version}",
    ]
    for name, digest in sorted((input_digests or {}).items()):
        lines.append(f"input {name}: {digest}")
    lines.append("")
    for dim in DIMENSIONS:
        lines.append(f"dimension {dim}: {verdicts[dim].upper()}")
        for r in results:
            if r.dimension != dim:
                continue
            observed = "n/a" if r.observed is None else f"{r.observed:.6f}"
            note = f"  ({r.notes})" if r.notes else ""
            lines.append(
                f"  [{r.verdict:>8}] {r.criterion_id:<{width}}  "
                f"observed {observed} {r.comparator} {r.threshold}{note}"
            )
        lines.append("")
    lines.append(f"overall: {overall.upper()}")
    lines.append("")
    lines.append(DISCLAIMER)
    return ("\n".join(lines) + "\n").encode("utf-8")
