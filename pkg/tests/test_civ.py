import random

import pytest

from civsim.civ import (
    MissedCallClass,
    Exhausted,
    PbxState,
    Variant,
    VerificationSession,
    feasible_variants,
    parse_verification_name,
    pbx_forward_challenge,
    pbx_register_outbound,
    recognize_verification_call,
    select_variant,
    verification_name,
)
from civsim.core import CELLULAR, LANDLINE_TRUECALL, SIP, Challenge, PhoneNumber, VerificationStatus
from civsim.signaling import MissedCallEvent
from civsim.simnet import Scenario, run_scenario


@pytest.mark.parametrize("caller,callee,expected", [
    (SIP, SIP, Variant.CLI_DTMF),
    (SIP, CELLULAR, Variant.DTMF_2SETUP),
    (CELLULAR, CELLULAR, Variant.DTMF_3SETUP),
    (LANDLINE_TRUECALL, LANDLINE_TRUECALL, Variant.DTMF_3SETUP),
    (CELLULAR, SIP, Variant.DTMF_3SETUP),
    (SIP, LANDLINE_TRUECALL, Variant.DTMF_3SETUP),
])
def test_variant_selection(caller, callee, expected):
    assert select_variant(caller, callee) is expected


def test_sip_pair_supports_every_variant():
    assert feasible_variants(SIP, SIP) == list(Variant)


def event(cli, name=""):
    return MissedCallEvent(PhoneNumber(cli), name, 0.0)


def test_short_cli_is_challenge_when_pending():
    assert recognize_verification_call(event("0391")) == Challenge("0391")


def test_full_number_is_ordinary():
    assert recognize_verification_call(event("5551234567")) is MissedCallClass.ORDINARY


def test_unsolicited_filtered():
    assert recognize_verification_call(event("0391"), pending=False) is MissedCallClass.UNSOLICITED


def test_long_challenge_needs_marker():
    assert recognize_verification_call(event("039112345", "CIVD"), n=9) == Challenge("039112345")
    assert recognize_verification_call(event("039112345"), n=9) is MissedCallClass.ORDINARY


def test_verification_names():
    assert parse_verification_name(verification_name("D")) == ("D", None)
    assert parse_verification_name(verification_name("C", "742")) == ("C", "742")
    assert parse_verification_name("Alice*") is None


def test_breakdown_sums_with_missing_milestone():
    vs = VerificationSession("c1", Challenge("1234"), Variant.CLI_DTMF, "b", "1", started_us=100)
    vs.stamp("verification_setup", 400)
    vs.set_outcome(VerificationStatus.NOT_VERIFIED, 1000)
    assert vs.breakdown_us() == (300, 600, 0, 0)
    assert sum(vs.breakdown_us()) == vs.total_us


def test_pbx_indices_unique_and_exhaust():
    pbx = PbxState(PhoneNumber("5550500000"), "Acme")
    rng = random.Random(0)
    seen = {pbx_register_outbound(pbx, f"e{i}", rng) for i in range(1000)}
    assert len(seen) == 1000
    with pytest.raises(Exhausted):
        pbx.register("late", rng)


class FixedRng:
    """Always proposes the same index first to force collisions."""

    def __init__(self):
        self.inner = random.Random(1)

    def randrange(self, n):
        return 7

    def choice(self, seq):
        return self.inner.choice(seq)


def test_pbx_release_and_reuse():
    pbx = PbxState(PhoneNumber("5550500000"), "Acme", max_draws=4)
    rng = FixedRng()
    a, b, c = (pbx.register(e, rng) for e in "abc")
    assert a == "007" and len({a, b, c}) == 3
    pbx.release(a)
    assert pbx.register("d", rng) == "007"
    assert pbx.extension_for("007") == "d"


def test_pbx_forwarding():
    pbx = PbxState(PhoneNumber("5550500000"), "Acme")
    pbx.active["742"] = "ext"

    class Ext:
        got = []

        def missed_call(self, ev):
            self.got.append(ev.displayed_cli.digits)

    agents = {"ext": Ext()}
    assert pbx_forward_challenge(pbx, event("0391", "CIVD742"), agents)
    assert agents["ext"].got == ["0391"]
    assert not pbx_forward_challenge(pbx, event("0391", "CIVD111"), agents)
    assert pbx.outbound_line("742").name == "Acme742*"


def run(topology, calibration, **kw):
    return run_scenario(topology, Scenario(**kw), calibration)


def test_honest_sip_verified(topology, calibration):
    m, trace = run(topology, calibration, caller="sip-a", callee="sip-b")
    assert m.outcome == "Verified" and m.rang and m.warning is None
    assert m.total_ms == pytest.approx(4700, rel=0.05)


def test_unflagged_call_rings_immediately(topology, calibration):
    m, _ = run(topology, calibration, caller="eve", callee="sip-b", present_as="sip-a",
               adversary={"strategy": "downgrade"})
    assert m.outcome == "NotAttempted" and m.warning == "caller not verified" and m.rang


def test_pbx_extension_verified(topology, calibration):
    m, _ = run(topology, calibration, caller="acme-101", callee="sip-b")
    assert m.outcome == "Verified"


def test_forwarded_number_verified(topology, calibration):
    m, _ = run(topology, calibration, caller="sip-a", callee="alice-mobile")
    assert m.outcome == "Verified" and m.callee == "alice-voip"


@pytest.mark.parametrize("variant", list(Variant))
def test_every_variant_verifies_between_sip_phones(topology, calibration, variant):
    m, _ = run(topology, calibration, caller="sip-a", callee="sip-b", variant=variant)
    assert m.outcome == "Verified" and m.variant == variant.value


@pytest.mark.parametrize("drop", ["challenge", "response"])
@pytest.mark.parametrize("pair", [("sip-a", "sip-b"), ("cellular-a", "landline-b"), ("landline-a", "cellular-b")])
def test_never_block_under_dropped_messages(topology, calibration, drop, pair):
    m, _ = run_scenario(topology, Scenario(*pair), calibration, drop=frozenset({drop}))
    assert m.rang and m.outcome == "NotVerified"
    assert sum(m.breakdown.as_dict().values()) == pytest.approx(m.total_ms)


def test_long_code_on_slowest_path_times_out_but_rings(topology, calibration):
    # the fixed timeout is sized for 4-digit codes; 6 digits cellular->landline overrun it
    m, _ = run_scenario(topology, Scenario("cellular-a", "landline-b", n=6), calibration)
    assert m.outcome == "NotVerified" and m.rang and m.verification.timed_out
    m, _ = run_scenario(topology, Scenario("cellular-a", "landline-b", n=6), calibration, timeout_ms=60_000)
    assert m.outcome == "Verified"
