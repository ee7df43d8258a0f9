import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantumness import protocols as pr
from quantumness.fidelity import (
    PER_CAMP,
    PER_QUBIT,
    PER_RECTANGLE,
    ClampWarning,
    FidelityError,
    FidelityEstimate,
    FidelityRecord,
    aggregate,
    estimate_bell_fidelity,
    estimate_ghz_fidelity,
    estimate_state_fidelity,
    estimates_csv,
    instance_fidelity,
    per_camp,
    per_qubit,
    per_rectangle,
    stage_pass,
)
from quantumness.protocols import ProtocolKind
from quantumness.simulator import CountsTable, density_oracle


def rec(camp, f, rect=None, qubits=None, se=0.01):
    return FidelityRecord("transmit", "AL", tuple(camp), frozenset(qubits or camp), f, se, rect)


def test_state_fidelity():
    s = pr.Setting("X-,Z+", axial=(("X", -1), ("Z", 1)))
    t = CountsTable({"10": 70, "00": 20, "11": 10}, 100)
    assert estimate_state_fidelity(t, s) == pytest.approx(0.7)
    with pytest.raises(FidelityError, match="bits"):
        estimate_state_fidelity(CountsTable({"1": 1}, 1), s)


def test_bell_fidelity_anchors():
    perfect = {"XX": {"00": 0.5, "11": 0.5}, "YY": {"01": 0.5, "10": 0.5}, "ZZ": {"00": 0.5, "11": 0.5}}
    assert estimate_bell_fidelity(perfect) == 1.0
    uniform = {k: {b: 0.25 for b in ("00", "01", "10", "11")} for k in ("XX", "YY", "ZZ")}
    assert estimate_bell_fidelity(uniform) == pytest.approx(0.25)


def test_bell_clamp_warns():
    bad = {"XX": CountsTable({"01": 10}, 10), "YY": CountsTable({"00": 10}, 10), "ZZ": CountsTable({"10": 10}, 10)}
    with pytest.warns(ClampWarning):
        assert estimate_bell_fidelity(bad) == 0.0


def test_missing_settings():
    with pytest.raises(FidelityError, match="missing"):
        estimate_bell_fidelity({"XX": {"00": 1.0}})
    with pytest.raises(FidelityError, match="missing"):
        instance_fidelity(ProtocolKind(pr.TRANSMIT), {"Z+": {"0": 1.0}})


def test_ghz_fidelity_from_oracle(ibex):
    inst = pr.all_to_all_instances(ProtocolKind(pr.CAT, 4, 2), range(6), max_alice=1)[0]
    outcomes = {s.label: density_oracle(c, None, ibex) for s, c in inst.circuits()}
    assert estimate_ghz_fidelity(outcomes, 4) == pytest.approx(1.0, abs=1e-12)
    # incoherent mixture of |0000> and |1111>: populations only
    mixed = dict(outcomes, **{f"par{k}": {"0000": 0.5, "0001": 0.5} for k in range(4)})
    assert estimate_ghz_fidelity(mixed, 4) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(FidelityError, match="bits"):
        estimate_ghz_fidelity(outcomes, 3)


def test_instance_fidelity_stderr():
    kind = ProtocolKind(pr.TRANSMIT)
    counts = {s.label: CountsTable({s.expected_bits: 80, "01"[s.expected_bits == "0"]: 20}, 100)
              for s in pr.settings_for(kind)}
    f, se = instance_fidelity(kind, counts)
    assert f == pytest.approx(0.8)
    assert se == pytest.approx((6 * 0.16 / 100) ** 0.5 / 6)
    exact = {s.label: {s.expected_bits: 1.0} for s in pr.settings_for(kind)}
    assert instance_fidelity(kind, exact) == (1.0, 0.0)


def test_keys_render():
    assert str(per_qubit(3)) == "q3"
    assert str(per_camp([5, 1])) == "camp(1,5)"
    assert str(per_rectangle(7)) == "rect7"


def test_aggregate_per_qubit_camp_rectangle():
    rs = [rec((1,), 0.9, 1), rec((1,), 0.7, 1), rec((2, 3), 0.8, 2)]
    by_q = {str(e.key): e for e in aggregate(rs, PER_QUBIT)}
    assert set(by_q) == {"q1", "q2", "q3"}
    assert by_q["q1"].min == 0.7 and by_q["q1"].max == 0.9 and by_q["q1"].mean == pytest.approx(0.8)
    assert by_q["q1"].n_circuits == 2
    by_c = [str(e.key) for e in aggregate(rs, PER_CAMP)]
    assert by_c == ["camp(1)", "camp(2,3)"]
    by_r = {str(e.key): e.min for e in aggregate(rs, PER_RECTANGLE)}
    assert by_r == {"rect1": 0.7, "rect2": 0.8}


def test_aggregate_errors():
    with pytest.raises(FidelityError, match="no records"):
        aggregate([], PER_QUBIT)
    with pytest.raises(FidelityError, match="unknown keying"):
        aggregate([rec((1,), 1.0)], "device")
    with pytest.raises(FidelityError, match="rectangle"):
        aggregate([rec((1,), 1.0)], PER_RECTANGLE)


def test_stage_pass_inclusive():
    t = 2 / 3
    e = FidelityEstimate(per_qubit(0), t, t, t, 0.0, 1)
    assert stage_pass([e], t)[per_qubit(0)]
    near = FidelityEstimate(per_qubit(1), t, t - 5e-13, t, 0.0, 1)
    below = FidelityEstimate(per_qubit(2), t, t - 1e-9, t, 0.0, 1)
    out = stage_pass([near, below], t)
    assert out[per_qubit(1)] and not out[per_qubit(2)]


def test_estimates_csv():
    e = FidelityEstimate(per_rectangle(4), 0.81234567, 0.7, 0.9, 0.0123, 8)
    assert estimates_csv([e], 2 / 3) == (
        "key,mean,min,max,stderr,n,pass\nrect4,0.812346,0.700000,0.900000,0.012300,8,pass\n"
    )


RECORDS = st.lists(
    st.tuples(
        st.lists(st.integers(0, 6), min_size=1, max_size=2, unique=True),
        st.floats(0, 1),
        st.integers(1, 4),
    ),
    min_size=1,
    max_size=30,
)


@settings(max_examples=60, deadline=None)
@given(RECORDS, st.randoms(use_true_random=False))
def test_aggregation_is_permutation_invariant(raw, rnd):
    rs = [rec(c, f, r) for c, f, r in raw]
    shuffled = list(rs)
    rnd.shuffle(shuffled)
    for keying in (PER_QUBIT, PER_CAMP, PER_RECTANGLE):
        assert aggregate(rs, keying) == aggregate(shuffled, keying)


@settings(max_examples=60, deadline=None)
@given(RECORDS, st.floats(0, 1), st.floats(0, 1))
def test_stage_pass_monotone_in_threshold(raw, t1, t2):
    lo, hi = sorted((t1, t2))
    ests = aggregate([rec(c, f, r) for c, f, r in raw], PER_QUBIT)
    strict, loose = stage_pass(ests, hi), stage_pass(ests, lo)
    assert all(loose[k] for k, ok in strict.items() if ok)
