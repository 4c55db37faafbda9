import csv
import io

import pytest

from nfcbms.threats import (
    ALL_COUNTERMEASURES,
    SCENARIOS,
    Asset,
    Countermeasure,
    matrix_report,
    run_all,
    run_scenario,
)

A, C = Asset, Countermeasure
MAPPING = {
    "T1": ({A.A1, A.A3}, {C.C1}, "Blocked"),
    "T2": ({A.A2, A.A3}, {C.C1}, "Blocked"),
    "T3": ({A.A1, A.A2}, {C.C1, C.C3}, "Blocked"),
    "T4": ({A.A1, A.A2, A.A3}, {C.C2, C.C3}, "Blocked"),
    "T5": ({A.A1, A.A3}, {C.C5}, "Detected"),
}


@pytest.fixture(scope="module")
def baseline():
    return {o.scenario.id: o for o in run_all()}


@pytest.fixture(scope="module")
def ablations():
    return {cm: {o.scenario.id: o for o in run_all(ALL_COUNTERMEASURES - {cm})} for cm in Countermeasure}


def test_mapping_is_exact():
    assert {t: (set(s.assets), set(s.countermeasures), s.expected) for t, s in SCENARIOS.items()} == MAPPING
    assert "C4" not in Countermeasure.__members__


def test_all_matched_with_defenses_on(baseline):
    assert all(o.matched_expectation for o in baseline.values())


def test_forged_signature_blocked_without_monitoring_frames(baseline):
    o = baseline["T1"]
    assert o.result == "Blocked" and o.evidence["monitoring_frames"] == 0
    assert o.evidence["flow"] == "rejected_signature"
    assert any("READ_SIGNATURE" in line for line in o.transcript)


def test_unknown_uid_never_asked_for_signature(baseline):
    o = baseline["T3"]
    assert o.evidence["flow"] == "rejected_uid"
    ccb_lines = [l for l in o.transcript if not l.startswith("backdoor")]
    assert not any("READ_SIGNATURE" in l for l in ccb_lines)


def test_remote_probe_gets_no_responses(baseline):
    o = baseline["T4"]
    assert o.evidence["remote_responses"] == 0 and o.evidence["external_responses"] == 0
    assert o.evidence["rejected_readings"] > 0 and o.evidence["accepted_wrong_readings"] == 0
    assert not any(l.startswith("remote") and " rsp " in l for l in o.transcript)


def test_log_edit_detected_at_exact_record(baseline):
    o = baseline["T5"]
    assert o.evidence["flagged_records"] == [7] and not o.evidence["plaintext_leaked"]


@pytest.mark.parametrize("cm", list(Countermeasure))
def test_ablation_flips_exactly_dependents(ablations, cm):
    flipped = {t for t, o in ablations[cm].items() if not o.matched_expectation}
    assert flipped == {t for t, s in SCENARIOS.items() if cm in s.countermeasures}


def test_ablation_monotone(baseline, ablations):
    for cm, outs in ablations.items():
        for t, o in outs.items():
            assert not (o.matched_expectation and not baseline[t].matched_expectation)
    both = {o.scenario.id: o for o in run_all(ALL_COUNTERMEASURES - {C.C2, C.C3})}
    for t in SCENARIOS:
        if not ablations[C.C2][t].matched_expectation or not ablations[C.C3][t].matched_expectation:
            assert not both[t].matched_expectation


def test_outcomes_are_evidence_backed(ablations):
    o = ablations[C.C1]["T1"]
    assert o.evidence["monitoring_frames"] > 0
    assert any("SRAM_CONTENT_READ" in l for l in o.transcript)
    o = ablations[C.C3]["T4"]
    assert any(l.startswith("remote") and " rsp " in l for l in o.transcript)


def test_matrix_report(baseline):
    text = matrix_report([baseline[t] for t in sorted(baseline)])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["threat", "name", "assets", "countermeasures", "expected", "result", "matched"]
    assert [r[0] for r in rows[1:]] == ["T1", "T2", "T3", "T4", "T5"]
    assert all(r[-1] == "yes" for r in rows[1:])
    assert rows[4][3] == "C2 C3"


def test_deterministic():
    a, b = run_scenario("T4", seed=3), run_scenario("T4", seed=3)
    assert a.transcript == b.transcript and a.evidence == b.evidence


def test_unknown_id():
    with pytest.raises(KeyError):
        run_scenario("T9")
