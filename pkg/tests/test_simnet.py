import json

import pytest

from civsim.calibration import ConfigError
from civsim.engine import trace_lines
from civsim.simnet import (
    AttackSetup,
    NotApplicable,
    Scenario,
    Topology,
    correlate_reflections,
    latency_breakdown,
    run_attack,
    run_scenario,
)

BASE = {"schema": "civsim.scenario/1", "caller": "sip-a", "callee": "sip-b"}


@pytest.mark.parametrize("patch,field", [
    ({"caller": 3}, "caller"),
    ({"n": 0}, "n"),
    ({"repeat": "x"}, "repeat"),
    ({"variant": "cli-smoke"}, "variant"),
    ({"colour": "red"}, "colour"),
    ({"schema": "other"}, "schema"),
    ({"adversary": {"strategy": "teleport"}}, "adversary.strategy"),
])
def test_malformed_scenario_names_field(patch, field):
    with pytest.raises(ConfigError) as exc:
        Scenario.from_dict({**BASE, **patch})
    assert exc.value.where.endswith(field)


def test_unknown_endpoint(topology):
    with pytest.raises(ConfigError):
        Scenario.from_dict({**BASE, "callee": "nobody"}).check(topology)


def test_topology_round_trip(topology):
    again = Topology.from_dict(json.loads(json.dumps(topology.to_dict())))
    assert again.to_dict() == topology.to_dict()


def test_same_seed_same_trace(topology, calibration):
    sc = Scenario("cellular-a", "landline-b", line_noise="calibrated")
    a = trace_lines(run_scenario(topology, sc, calibration, seed=4)[1])
    b = trace_lines(run_scenario(topology, sc, calibration, seed=4)[1])
    assert a == b and a


def test_landline_cellular_total(topology, calibration):
    m, _ = run_scenario(topology, Scenario("cellular-a", "landline-b"), calibration)
    assert m.outcome == "Verified"
    assert m.total_ms == pytest.approx(29_000, rel=0.05)


def test_spoofer_cannot_read_challenge(topology, calibration):
    m, trace = run_scenario(topology, Scenario("eve", "sip-b", present_as="sip-a",
                                               adversary={"strategy": "spoof-and-guess"}), calibration, seed=2)
    assert m.outcome == "NotVerified" and m.rang
    # the challenge went to the true owner of the displayed number
    assert any(ep == "sip-a" and ev == "missed-call" for _, ep, ev, _ in trace)


def test_breakdown_not_applicable_without_verification(topology, calibration):
    m, _ = run_scenario(topology, Scenario("eve", "sip-b", present_as="sip-a",
                                           adversary={"strategy": "downgrade"}), calibration)
    with pytest.raises(NotApplicable):
        latency_breakdown(m)


def test_attack_independent_of_jobs(topology, calibration):
    one = run_attack(topology, "spoof-and-guess", 12_000, 3, calibration, jobs=1)
    two = run_attack(topology, "spoof-and-guess", 12_000, 3, calibration, jobs=2)
    assert one.to_dict() == two.to_dict()
    assert one.wall_violations == 0 and one.rang == 12_000


def test_downgrade_small(topology, calibration):
    st = run_attack(topology, "downgrade", 50, 0, calibration)
    assert st.verified == 0 and st.not_attempted == 50 and st.warnings == 50


def test_reflected_dos_correlation(topology, calibration):
    st = run_attack(topology, {"strategy": "reflected-dos", "calls": 10}, 1, 5, calibration)
    assert st.victim_missed_calls == 10 and st.victim_filtered == 10
    assert st.cdr_pairs == 10 and st.cdr_unmatched == 0 and st.cdr_attributed_to_attacker == 10


def test_correlation_needs_prior_spoofed_call():
    from civsim.signaling import CdrRecord

    reflected = CdrRecord("c2", "sip-b", "5550100002", "0391", "CIVD", "5550100001", 10)
    _, unmatched = correlate_reflections([reflected], "5550100001")
    assert unmatched == [reflected]


def test_attacker_must_be_adversary(topology, calibration):
    with pytest.raises(ConfigError):
        run_attack(topology, "downgrade", 1, 0, calibration, AttackSetup(attacker="sip-c"))


def test_guess_rate_follows_code_length(topology, calibration):
    st = run_attack(topology, {"strategy": "spoof-and-guess", "n_guess_digits": 1}, 2000, 0, calibration)
    lo, hi = st.interval()
    assert lo <= 0.1 <= hi
