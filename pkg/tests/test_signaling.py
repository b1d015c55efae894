import pytest

from civsim.calibration import LatencyCalibration
from civsim.core import CELLULAR, LANDLINE_TRUECALL, SIP, CallerLine, NetworkKind, PhoneNumber
from civsim.dtmf import DtmfEventSequence, NoiseModel, PathKind, TimingConfig
from civsim.engine import Simulator
from civsim.signaling import (
    TRANSITIONS,
    Busy,
    CallState,
    CapabilityMissing,
    CapabilityViolation,
    CnamDatabase,
    CnamRecord,
    DtmfMode,
    Endpoint,
    Handler,
    InvalidState,
    Network,
    OutOfBandDtmf,
    Unroutable,
    cnam_lookup,
    gateway_convert,
    payload_digits,
)


class Phone(Handler):
    """Answers everything and records what it hears."""

    def __init__(self, net, ep, answer=True):
        self.net, self.ep, self.auto = net, ep, answer
        ep.handler = self
        self.seen, self.digits = [], []

    def incoming(self, s):
        self.seen.append(s.displayed)
        if self.auto:
            self.net.answer(s)

    def dtmf(self, s, digits):
        self.digits.append((self.net.sim.now_ms, digits))


def make_net(calibration=None, **kw):
    cal = calibration or LatencyCalibration.uniform(100.0)
    net = Network(Simulator(0), cal, **kw)
    eps = {
        "sip-a": Endpoint("sip-a", PhoneNumber("5550100001"), SIP, "Alice"),
        "sip-b": Endpoint("sip-b", PhoneNumber("5550100002"), SIP, "Bob"),
        "cell": Endpoint("cell", PhoneNumber("5550200001"), CELLULAR, "Carol"),
        "land": Endpoint("land", PhoneNumber("5550300001"), LANDLINE_TRUECALL, "Dave"),
    }
    for ep in eps.values():
        net.add_endpoint(ep)
    return net, eps


def test_state_machine_has_no_exit_from_ended():
    assert not TRANSITIONS[CallState.ENDED]


def test_honest_call_shows_own_line():
    net, eps = make_net()
    bob = Phone(net, eps["sip-b"])
    net.place_call(eps["sip-a"], eps["sip-b"].number)
    net.sim.run()
    assert bob.seen == [eps["sip-a"].line]


def test_spoofed_line_is_displayed():
    net, eps = make_net()
    eve = Endpoint("eve", PhoneNumber("5550666000"), SIP, adversary=True)
    net.add_endpoint(eve)
    bob = Phone(net, eps["sip-b"])
    net.place_call(eve, eps["sip-b"].number, eps["cell"].line)
    net.sim.run()
    assert bob.seen[0].number == eps["cell"].number


def test_cellular_cannot_spoof():
    net, eps = make_net()
    with pytest.raises(CapabilityMissing):
        net.place_call(eps["cell"], eps["sip-b"].number, eps["sip-a"].line)


def test_unroutable_partition():
    net, eps = make_net()
    net.link("sip-a", "sip-b")
    with pytest.raises(Unroutable):
        net.place_call(eps["sip-a"], eps["land"].number)
    with pytest.raises(Unroutable):
        net.place_call(eps["sip-a"], PhoneNumber("5559999999"))


def test_landline_without_call_waiting_is_busy():
    net, eps = make_net()
    Phone(net, eps["land"])
    net.place_call(eps["sip-a"], eps["land"].number)
    with pytest.raises(Busy):
        net.place_call(eps["sip-b"], eps["land"].number)


def test_abandon_delivers_missed_call_without_charge():
    net, eps = make_net()
    Phone(net, eps["sip-b"], answer=False)
    s = net.place_call(eps["sip-a"], eps["sip-b"].number, CallerLine(PhoneNumber("0391"), "CIVD"))
    net.sim.run()
    assert s.state is CallState.RINGING
    ev = net.abandon(s)
    assert ev.displayed_cli.digits == "0391"
    assert eps["sip-b"].missed_calls == [ev]
    assert eps["sip-a"].charges == 0
    assert s.cdr.abandoned


def test_abandon_after_answer_rejected():
    net, eps = make_net()
    Phone(net, eps["sip-b"])
    s = net.place_call(eps["sip-a"], eps["sip-b"].number)
    net.sim.run()
    assert s.state is CallState.ANSWERED
    assert eps["sip-a"].charges == 1
    with pytest.raises(InvalidState):
        net.abandon(s)


def test_hold_resume_and_capabilities():
    net, eps = make_net()
    Phone(net, eps["sip-b"])
    Phone(net, eps["land"])
    s = net.place_call(eps["sip-a"], eps["sip-b"].number)
    net.sim.run()
    net.hold(s, eps["sip-b"])
    assert s.state is CallState.HELD
    net.resume(s, eps["sip-b"])
    net.sim.run()
    assert s.state is CallState.ANSWERED

    t = net.place_call(eps["sip-a"], eps["land"].number)
    net.sim.run()
    with pytest.raises(CapabilityMissing):
        net.hold(t, eps["land"])
    net.hangup(s, eps["sip-a"])
    with pytest.raises(InvalidState):
        net.hold(s, eps["sip-b"])


def test_sip_in_call_dtmf_timing(calibration):
    net, eps = make_net(calibration)
    bob = Phone(net, eps["sip-b"])
    s = net.place_call(eps["sip-a"], eps["sip-b"].number)
    net.sim.run()
    start = net.sim.now_ms
    net.send_dtmf(s, eps["sip-a"], "0391")
    net.sim.run()
    cost = calibration.path_cost(PathKind.DIGITAL_EVENT)
    expected = cost.overhead_ms + 4 * cost.per_digit_ms + 4 * calibration.recognition("sip")
    assert bob.digits == [(pytest.approx(start + expected), "0391")]


def test_cellular_cannot_send_in_call_dtmf():
    net, eps = make_net()
    Phone(net, eps["sip-b"])
    s = net.place_call(eps["cell"], eps["sip-b"].number)
    net.sim.run()
    with pytest.raises(CapabilityMissing):
        net.send_dtmf(s, eps["cell"], "0391")
    with pytest.raises(InvalidState):
        net.send_dtmf(s, eps["cell"], "0391", DtmfMode.DIAL_STRING)


def test_cellular_dial_string_pause():
    net, eps = make_net()
    bob = Phone(net, eps["sip-b"])
    s = net.dial(eps["cell"], "5550100002,0391")
    net.sim.run()
    assert bob.digits and bob.digits[0][1] == "0391"
    answered_ms = s.cdr.answered_us / 1000.0
    assert bob.digits[0][0] >= answered_ms + CELLULAR.dial_string_pause_ms


def test_gateway_chain_is_lossless():
    audio = gateway_convert(DtmfEventSequence.from_digits("1234"), NetworkKind.VOIP, NetworkKind.PSTN)
    back = gateway_convert(audio, NetworkKind.PSTN, NetworkKind.VOIP)
    assert payload_digits(back) == "1234"
    ev = gateway_convert(OutOfBandDtmf("1234"), NetworkKind.CELLULAR, NetworkKind.VOIP)
    assert isinstance(ev, DtmfEventSequence) and ev.digits == "1234"


def test_gateway_noisy_analogue_leg(calibration):
    import numpy as np

    noise = NoiseModel.gaussian(calibration.noise_snr_db)
    rng = np.random.default_rng(5)
    ok = 0
    for _ in range(20):
        audio = gateway_convert(DtmfEventSequence.from_digits("1234"), NetworkKind.VOIP, NetworkKind.PSTN,
                                TimingConfig(100, 100), noise, rng)
        ok += payload_digits(audio) == "1234"
    assert ok == 20


def test_cnam_database():
    db = CnamDatabase([CnamRecord(PhoneNumber("5550100001"), "Alice", True)])
    assert cnam_lookup(db, PhoneNumber("5550100001")).civ_flag
    assert cnam_lookup(db, PhoneNumber("5550100009")) is None
    assert db.dips == 2


def test_cnam_overwrites_presented_name():
    db = CnamDatabase([CnamRecord(PhoneNumber("5550100001"), "Alice", True)])
    net, eps = make_net(cnam=db)
    eps["land"].cnam_lookup = True
    dave = Phone(net, eps["land"])
    net.place_call(eps["sip-a"], eps["land"].number, CallerLine(eps["sip-a"].number, "Mallory"))
    net.sim.run()
    assert dave.seen[0].name == "Alice*"


def test_adversary_wall():
    net, eps = make_net()
    eve = Endpoint("eve", PhoneNumber("5550666000"), SIP, adversary=True)
    net.add_endpoint(eve)
    with pytest.raises(CapabilityViolation):
        net._check_wall(eve, eps["sip-a"].number)
    net._check_wall(eve, eve.number)
