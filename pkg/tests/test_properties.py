"""Property tests over generated inputs."""

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from civsim.civ import Variant, feasible_variants
from civsim.core import PROFILES
from civsim.dtmf import TimingConfig, decode, synthesize
from civsim.harness.reports import Report
from civsim.harness.sweeps import PAIRS
from civsim.simnet import Scenario, default_topology, run_scenario
from civsim.calibration import default_calibration

TOPOLOGY = default_topology()
CAL = default_calibration()
SLOW = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@SLOW
@given(st.text(alphabet="0123456789*#ABCD", min_size=1, max_size=8),
       st.floats(40, 120), st.floats(40, 160))
def test_clean_dtmf_round_trip(digits, mark, space):
    assert decode(synthesize(digits, TimingConfig(mark, space))) == digits


numbers = st.one_of(st.none(), st.integers(-10**9, 10**9), st.floats(allow_nan=False))
words = st.one_of(st.none(), st.text(st.characters(blacklist_categories=("Cc", "Cs")), max_size=12))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.fixed_dictionaries({"strategy": words, "trials": numbers, "rate": numbers,
                                       "ci_high": numbers}), max_size=5))
def test_report_round_trip(rows):
    rep = Report("attack")
    for r in rows:
        rep.add(**r)
    text = rep.to_json()
    assert Report.from_json(text).to_json() == text
    csv_text = rep.to_csv()
    assert Report.from_csv("attack", csv_text).to_csv() == csv_text


@SLOW
@given(st.sampled_from(PAIRS), st.integers(0, 2**32), st.integers(1, 5),
       st.sets(st.sampled_from(["challenge", "response"]), max_size=2))
def test_never_block_and_accounting(pair, seed, n, drop):
    m, _ = run_scenario(TOPOLOGY, Scenario(*pair, n=n), CAL, seed=seed, drop=frozenset(drop))
    assert m.rang
    assert m.outcome == ("NotVerified" if drop else "Verified")
    vs = m.verification
    assert sum(vs.breakdown_us()) == vs.total_us
    assert all(part >= 0 for part in vs.breakdown_us())


@given(st.sampled_from(list(PROFILES.values())), st.sampled_from(list(PROFILES.values())))
def test_three_setup_always_feasible(caller, callee):
    variants = feasible_variants(caller, callee)
    assert variants[-1] is Variant.DTMF_3SETUP
    assert len(set(variants)) == len(variants)

