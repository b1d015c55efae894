"""Call control over a heterogeneous network of PSTN, cellular and SIP endpoints.

Everything here runs on a :class:`~civsim.engine.Simulator` timeline. The
network never validates a presented caller line: whatever the originating
endpoint is allowed to present is what the far end sees.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable

import networkx as nx

from .calibration import LatencyCalibration
from .core import CallerLine, CivError, NetworkKind, PhoneNumber, PlatformProfile
from .dtmf import (
    CLEAN,
    RECEIVER_TIMING,
    TRUECALL_TIMING,
    AudioBuffer,
    DtmfEventSequence,
    NoiseModel,
    PathKind,
    TimingConfig,
    apply_noise,
    decode,
    synthesize,
    transmission_time,
)
from .engine import Simulator


class Unroutable(CivError):
    pass


class Busy(CivError):
    pass


class InvalidState(CivError):
    pass


class CapabilityMissing(CivError):
    pass


class CapabilityViolation(CivError, AssertionError):
    """An adversary endpoint was about to receive data addressed to a number it does not own."""


class CallState(str, enum.Enum):
    DIALING = "dialing"
    RINGING = "ringing"
    ANSWERED = "answered"
    HELD = "held"
    ENDED = "ended"


TRANSITIONS = {
    CallState.DIALING: frozenset({CallState.RINGING, CallState.ENDED}),
    CallState.RINGING: frozenset({CallState.ANSWERED, CallState.ENDED}),
    CallState.ANSWERED: frozenset({CallState.HELD, CallState.ENDED}),
    CallState.HELD: frozenset({CallState.ANSWERED, CallState.ENDED}),
    CallState.ENDED: frozenset(),
}


class DtmfMode(str, enum.Enum):
    IN_CALL = "in-call"
    DIAL_STRING = "dial-string-extension"


@dataclass(frozen=True)
class OutOfBandDtmf:
    """DTMF carried as signaling messages (e.g. GSM control channel)."""

    digits: str


@dataclass(frozen=True)
class MissedCallEvent:
    displayed_cli: PhoneNumber
    displayed_name: str
    timestamp: float
    session_id: str = ""


@dataclass(frozen=True)
class CnamRecord:
    number: PhoneNumber
    registered_name: str
    civ_flag: bool = False


class CnamDatabase:
    def __init__(self, records=()):
        self._records: dict[str, CnamRecord] = {}
        self.dips = 0
        for rec in records:
            self.register(rec)

    def register(self, record: CnamRecord):
        # at most one record per number; re-registration replaces
        self._records[record.number.digits] = record

    def lookup(self, number: PhoneNumber) -> CnamRecord | None:
        self.dips += 1
        return self._records.get(number.digits)

    def __len__(self):
        return len(self._records)


def cnam_lookup(db: CnamDatabase, number: PhoneNumber) -> CnamRecord | None:
    return db.lookup(number)


@dataclass(eq=False)
class CdrRecord:
    session_id: str
    origin: str
    origin_number: str
    presented_cli: str
    presented_name: str
    callee_number: str
    start_us: int
    answered_us: int | None = None
    end_us: int | None = None
    abandoned: bool = False

    def to_dict(self) -> dict:
        return {
            "session": self.session_id,
            "origin": self.origin,
            "origin_number": self.origin_number,
            "presented_cli": self.presented_cli,
            "presented_name": self.presented_name,
            "callee_number": self.callee_number,
            "start_ms": self.start_us / 1000.0,
            "answered_ms": None if self.answered_us is None else self.answered_us / 1000.0,
            "end_ms": None if self.end_us is None else self.end_us / 1000.0,
            "abandoned": self.abandoned,
        }


class Handler:
    """Endpoint behaviour. The default is a plain phone that lets calls ring."""

    def incoming(self, session: CallSession): ...

    def ringing(self, session: CallSession): ...

    def answered(self, session: CallSession): ...

    def ended(self, session: CallSession, by: Endpoint | None): ...

    def held(self, session: CallSession): ...

    def resumed(self, session: CallSession): ...

    def missed_call(self, event: MissedCallEvent): ...

    def dtmf(self, session: CallSession, digits: str): ...


PLAIN_PHONE = Handler()


@dataclass(eq=False)
class Endpoint:
    id: str
    number: PhoneNumber
    profile: PlatformProfile
    name: str = ""
    kind: NetworkKind | None = None
    owned: frozenset = frozenset()
    forward_to: str | None = None
    adversary: bool = False
    cnam_lookup: bool = False
    handler: Handler = PLAIN_PHONE
    sessions: set = field(default_factory=set)
    charges: int = 0
    missed_calls: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind is None:
            self.kind = self.profile.network
        self.kind = NetworkKind(self.kind)
        self.owned = frozenset(self.owned) | {self.number.digits}

    @property
    def line(self) -> CallerLine:
        return CallerLine(self.number, self.name)

    def active_sessions(self):
        return [s for s in self.sessions if s.state is not CallState.ENDED]

    def __repr__(self):
        return f"Endpoint({self.id!r}, {self.number.digits}, {self.profile.name})"


@dataclass(eq=False)
class CallSession:
    id: str
    caller: Endpoint
    callee: Endpoint
    caller_line: CallerLine
    callee_number: PhoneNumber
    path: tuple
    state: CallState = CallState.DIALING
    charge_to_caller: bool = False
    dial_suffix: str | None = None
    tag: tuple = ()
    displayed: CallerLine | None = None
    cdr: CdrRecord | None = None
    rang_at: int | None = None
    on_end: list = field(default_factory=list)

    def __post_init__(self):
        if self.displayed is None:
            self.displayed = self.caller_line

    def peer(self, ep: Endpoint) -> Endpoint:
        return self.callee if ep is self.caller else self.caller

    def transition(self, new: CallState):
        if new not in TRANSITIONS[self.state]:
            raise InvalidState(f"session {self.id}: {self.state.value} -> {new.value} not allowed")
        self.state = new

    @property
    def alive(self) -> bool:
        return self.state is not CallState.ENDED

    @property
    def purpose(self):
        return self.tag[0] if self.tag else None


@dataclass(frozen=True)
class RingEvent:
    time_us: int
    endpoint: str
    session_id: str
    displayed_cli: str
    displayed_name: str
    status: str
    warning: str | None = None


@dataclass(frozen=True)
class DtmfTransfer:
    session_id: str
    purpose: str | None
    sender: str
    receiver: str
    digits_sent: str
    digits_received: str
    sent_us: int
    received_us: int


# DTMF representation each network kind carries natively
NATIVE_PATH = {
    NetworkKind.PSTN: PathKind.ANALOGUE_INBAND,
    NetworkKind.CELLULAR: PathKind.OUT_OF_BAND,
    NetworkKind.VOIP: PathKind.DIGITAL_EVENT,
}


def _segments(kinds) -> tuple:
    out = []
    for k in kinds:
        if not out or out[-1] is not k:
            out.append(k)
    return tuple(out)


def dtmf_path_kind(path) -> PathKind:
    """The slowest representation on a route decides the per-digit cost."""
    if NetworkKind.PSTN in path:
        return PathKind.ANALOGUE_INBAND
    if NetworkKind.CELLULAR in path:
        return PathKind.OUT_OF_BAND
    return PathKind.DIGITAL_EVENT


def payload_digits(payload) -> str:
    if isinstance(payload, AudioBuffer):
        return decode(payload, RECEIVER_TIMING)
    if isinstance(payload, (DtmfEventSequence, OutOfBandDtmf)):
        return payload.digits
    return str(payload)


def encode_dtmf(digits: str, kind: NetworkKind, cfg: TimingConfig = TRUECALL_TIMING,
                noise: NoiseModel = CLEAN, rng=None):
    kind = NetworkKind(kind)
    if kind is NetworkKind.PSTN:
        audio = synthesize(digits, cfg)
        return audio if noise.is_clean else apply_noise(audio, noise, rng)
    if kind is NetworkKind.VOIP:
        return DtmfEventSequence.from_digits(digits, cfg)
    return OutOfBandDtmf(digits)


def gateway_convert(payload, src: NetworkKind, dst: NetworkKind, cfg: TimingConfig = TRUECALL_TIMING,
                    noise: NoiseModel = CLEAN, rng=None):
    """Switch a DTMF payload into ``dst``'s representation, keeping the symbols.

    Entering an analogue leg re-synthesizes tones and applies that leg's noise.
    """
    src, dst = NetworkKind(src), NetworkKind(dst)
    if src is dst:
        return payload
    return encode_dtmf(payload_digits(payload), dst, cfg, noise, rng)


class Network:
    """Endpoints, routing, sessions and call detail records for one simulation run."""

    def __init__(self, sim: Simulator, calibration: LatencyCalibration, cnam: CnamDatabase | None = None,
                 analogue_noise: NoiseModel = CLEAN):
        self.sim = sim
        self.cal = calibration
        self.cnam = cnam if cnam is not None else CnamDatabase()
        self.analogue_noise = analogue_noise
        self.endpoints: dict[str, Endpoint] = {}
        self._owners: dict[str, Endpoint] = {}
        self._graph: nx.Graph | None = None
        self._route_cache: dict = {}
        self._ids = itertools.count(1)
        self.cdrs: list[CdrRecord] = []
        self._live: dict = {}
        self._delay_cache: dict = {}
        self.rings: list[RingEvent] = []
        self.transfers: list[DtmfTransfer] = []
        self.drop_purposes: set = set()
        self.call_setups = 0

    # topology

    def add_endpoint(self, ep: Endpoint) -> Endpoint:
        if ep.id in self.endpoints:
            raise ValueError(f"duplicate endpoint id {ep.id!r}")
        for number in ep.owned:
            if number in self._owners:
                raise ValueError(f"number {number} already owned by {self._owners[number].id}")
        self.endpoints[ep.id] = ep
        for number in ep.owned:
            self._owners[number] = ep
        if self._graph is not None:
            self._graph.add_node(ep.id)
        return ep

    def link(self, a: str, b: str):
        """Restrict routing to explicit links; without any link every pair is directly connected."""
        if self._graph is None:
            self._graph = nx.Graph()
            self._graph.add_nodes_from(self.endpoints)
        for x in (a, b):
            if x not in self.endpoints:
                raise KeyError(f"unknown endpoint {x!r}")
        self._graph.add_edge(a, b)
        self._route_cache.clear()

    def owner_of(self, number: PhoneNumber) -> Endpoint | None:
        return self._owners.get(number.digits)

    def resolve(self, number: PhoneNumber) -> tuple[Endpoint, Endpoint]:
        """(owner, endpoint the call is delivered to) after following call forwarding."""
        owner = self._owners.get(number.digits)
        if owner is None:
            raise Unroutable(f"no endpoint owns {number.digits}")
        target, seen = owner, {owner.id}
        while target.forward_to is not None:
            target = self.endpoints[target.forward_to]
            if target.id in seen:
                raise Unroutable(f"forwarding loop at {target.id}")
            seen.add(target.id)
        return owner, target

    def route(self, a: Endpoint, b: Endpoint) -> tuple:
        key = (a.id, b.id)
        path = self._route_cache.get(key)
        if path is None:
            if self._graph is None or a is b:
                hops = [a, b]
            else:
                try:
                    ids = nx.shortest_path(self._graph, a.id, b.id)
                except nx.NetworkXNoPath:
                    raise Unroutable(f"no path from {a.id} to {b.id}") from None
                hops = [self.endpoints[i] for i in ids]
            path = _segments(ep.kind for ep in hops)
            self._route_cache[key] = path
        return path

    # call control

    def _new_id(self) -> str:
        return f"c{next(self._ids)}"

    def _check_wall(self, ep: Endpoint, addressed: PhoneNumber):
        if ep.adversary and addressed.digits not in ep.owned:
            raise CapabilityViolation(f"{ep.id} would receive data addressed to {addressed.digits}")

    def place_call(self, origin: Endpoint, to_number: PhoneNumber, presented: CallerLine | None = None,
                   dial_suffix: str | None = None, tag: tuple = ()) -> CallSession:
        presented = origin.line if presented is None else presented
        if presented.number.digits not in origin.owned and not origin.profile.can_modify_cli:
            raise CapabilityMissing(f"{origin.id} ({origin.profile.name}) cannot modify its CLI")
        owner, target = self.resolve(to_number)
        path = self.route(origin, owner)
        if target is not owner:
            path = _segments(path + self.route(owner, target))
        if not target.profile.has_call_waiting and target.active_sessions():
            raise Busy(f"{target.id} is in a call and has no call waiting")
        s = CallSession(self._new_id(), origin, target, presented, to_number, path,
                        dial_suffix=dial_suffix, tag=tag)
        s.cdr = CdrRecord(s.id, origin.id, origin.number.digits, presented.number.digits, presented.name,
                          to_number.digits, self.sim.now)
        self.cdrs.append(s.cdr)
        origin.sessions.add(s)
        target.sessions.add(s)
        self._live[s] = None
        self.call_setups += 1
        if self.sim.trace is not None:
            self.sim.log(origin.id, "dial", f"{s.id} {presented.number.digits}/{presented.name} -> {to_number.digits}")
        delay = self.cal.call_setup(origin.kind, target.kind)
        if self.cal.setup_jitter:
            delay *= 1.0 + self.cal.setup_jitter * (2.0 * self.sim.rng.random() - 1.0)
        if target.cnam_lookup:
            delay += self.cal.cnam_ms
        self.sim.schedule(delay, self._ring, s)
        return s

    def dial(self, origin: Endpoint, dial_string: str, presented: CallerLine | None = None,
             tag: tuple = ()) -> CallSession:
        """Place a call from a dial string such as ``"5551234567,0391"``."""
        number, _, suffix = dial_string.partition(",")
        return self.place_call(origin, PhoneNumber(number), presented, dial_suffix=suffix or None, tag=tag)

    def _ring(self, s: CallSession):
        if s.state is not CallState.DIALING:
            return
        s.transition(CallState.RINGING)
        s.rang_at = self.sim.now
        if s.callee.cnam_lookup:
            rec = self.cnam.lookup(s.caller_line.number)
            if rec is not None:
                name = rec.registered_name.rstrip("*") + ("*" if rec.civ_flag else "")
                s.displayed = CallerLine(s.caller_line.number, name[-15:] if len(name) > 15 else name)
        self._check_wall(s.callee, s.callee_number)
        if self.sim.trace is not None:
            self.sim.log(s.callee.id, "incoming", f"{s.id} {s.displayed.number.digits}/{s.displayed.name}")
        s.callee.handler.incoming(s)
        if s.state is CallState.RINGING:
            s.caller.handler.ringing(s)

    def answer(self, s: CallSession, by: Endpoint | None = None):
        if by is not None and by is not s.callee:
            raise InvalidState(f"{by.id} cannot answer session {s.id}")
        if s.state is not CallState.RINGING:
            raise InvalidState(f"cannot answer session {s.id} in state {s.state.value}")
        self.sim.schedule(self.cal.answer_ms, self._answered, s)

    def _answered(self, s: CallSession):
        if s.state is not CallState.RINGING:
            return
        s.transition(CallState.ANSWERED)
        s.charge_to_caller = True
        s.caller.charges += 1
        s.cdr.answered_us = self.sim.now
        self.sim.log(s.callee.id, "answered", s.id)
        s.caller.handler.answered(s)
        s.callee.handler.answered(s)
        if s.dial_suffix and s.alive:
            self.sim.schedule(s.caller.profile.dial_string_pause_ms, self._transmit, s, s.caller, s.dial_suffix, s.tag)

    def abandon(self, s: CallSession) -> MissedCallEvent:
        if s.state not in (CallState.DIALING, CallState.RINGING):
            raise InvalidState(f"cannot abandon session {s.id} in state {s.state.value}")
        s.transition(CallState.ENDED)
        s.charge_to_caller = False
        s.cdr.end_us = self.sim.now
        s.cdr.abandoned = True
        self._release(s)
        event = MissedCallEvent(s.displayed.number, s.displayed.name, self.sim.now_ms, s.id)
        s.callee.missed_calls.append(event)
        if self.sim.trace is not None:
            self.sim.log(s.callee.id, "missed-call", f"{s.id} {event.displayed_cli.digits}/{event.displayed_name}")
        if s.purpose in self.drop_purposes:
            self.sim.log(s.callee.id, "dropped", s.id)
            return event
        self._check_wall(s.callee, s.callee_number)
        if s.purpose == "challenge":
            s.tag[1].stamp("challenge_received")
        s.callee.handler.missed_call(event)
        return event

    def hangup(self, s: CallSession, by: Endpoint | None = None):
        if s.state is CallState.ENDED:
            raise InvalidState(f"session {s.id} already ended")
        s.transition(CallState.ENDED)
        s.cdr.end_us = self.sim.now
        self._release(s)
        self.sim.log(by.id if by else "network", "hangup", s.id)
        for ep in (s.caller, s.callee):
            if ep is not by:
                ep.handler.ended(s, by)

    def _release(self, s: CallSession):
        self._live.pop(s, None)
        s.caller.sessions.discard(s)
        s.callee.sessions.discard(s)
        for fn in s.on_end:
            fn(s)

    def hold(self, s: CallSession, by: Endpoint) -> CallSession:
        if not by.profile.has_call_waiting:
            raise CapabilityMissing(f"{by.id} ({by.profile.name}) has no call waiting")
        if s.state is not CallState.ANSWERED:
            raise InvalidState(f"cannot hold session {s.id} in state {s.state.value}")
        s.transition(CallState.HELD)
        self.sim.log(by.id, "hold", s.id)
        s.peer(by).handler.held(s)
        return s

    def resume(self, s: CallSession, by: Endpoint) -> CallSession:
        """Take a held call off hold; media flows again after the calibrated resume time."""
        if not by.profile.has_call_waiting:
            raise CapabilityMissing(f"{by.id} ({by.profile.name}) has no call waiting")
        if s.state is not CallState.HELD:
            raise InvalidState(f"cannot resume session {s.id} in state {s.state.value}")
        self.sim.schedule(self.cal.resume_ms, self._resumed, s, by)
        return s

    def _resumed(self, s: CallSession, by: Endpoint):
        if s.state is not CallState.HELD:
            return
        s.transition(CallState.ANSWERED)
        self.sim.log(by.id, "resumed", s.id)
        s.peer(by).handler.resumed(s)
        by.handler.resumed(s)

    def send_dtmf(self, s: CallSession, sender: Endpoint, digits: str, mode: DtmfMode = DtmfMode.IN_CALL,
                  tag: tuple = ()):
        mode = DtmfMode(mode)
        if mode is DtmfMode.DIAL_STRING:
            raise InvalidState("dial-string DTMF is given at dial time; use place_call(dial_suffix=...)")
        if not sender.profile.can_send_incall_dtmf:
            raise CapabilityMissing(f"{sender.id} ({sender.profile.name}) cannot send DTMF in a call")
        if s.state is not CallState.ANSWERED:
            raise InvalidState(f"cannot send DTMF on session {s.id} in state {s.state.value}")
        self._transmit(s, sender, digits, tag)

    def dtmf_timing(self, s: CallSession, sender: Endpoint) -> TimingConfig:
        if NetworkKind.PSTN in s.path:
            return TRUECALL_TIMING
        return TimingConfig(sender.profile.mark_ms, sender.profile.space_ms)

    def dtmf_delay_ms(self, s: CallSession, sender: Endpoint, num_digits: int) -> float:
        receiver = s.peer(sender)
        key = (s.path, sender.profile, receiver.profile, num_digits)
        t = self._delay_cache.get(key)
        if t is None:
            path = dtmf_path_kind(s.path)
            t = transmission_time(num_digits, path, self.dtmf_timing(s, sender), self.cal.path_cost(path))
            t += (len(s.path) - 1) * self.cal.gateway_ms
            t += num_digits * self.cal.recognition(receiver.profile.name)
            self._delay_cache[key] = t
        return t

    def carry(self, s: CallSession, sender: Endpoint, digits: str) -> str:
        """Move ``digits`` leg by leg from the sender's network to the receiver's."""
        legs = s.path if sender is s.caller else tuple(reversed(s.path))
        if len(legs) == 1 and legs[0] is not NetworkKind.PSTN:
            # one digital network end to end: no gateway touches the values
            return payload_digits(encode_dtmf(digits, legs[0]))
        cfg = self.dtmf_timing(s, sender)
        noise = self.analogue_noise
        rng = None if noise.is_clean else self.sim.noise_rng()
        payload = encode_dtmf(digits, legs[0], cfg, noise, rng)
        for src, dst in zip(legs, legs[1:]):
            payload = gateway_convert(payload, src, dst, cfg, noise, rng)
        return payload_digits(payload)

    def _transmit(self, s: CallSession, sender: Endpoint, digits: str, tag: tuple = ()):
        if s.state is not CallState.ANSWERED:
            self.sim.log(sender.id, "dtmf-lost", s.id)
            return
        receiver = s.peer(sender)
        received = self.carry(s, sender, digits)
        if self.sim.trace is not None:
            self.sim.log(sender.id, "dtmf-sent", f"{s.id} {digits}")
        self.sim.schedule(self.dtmf_delay_ms(s, sender, len(digits)), self._deliver_dtmf, s, sender, receiver,
                          digits, received, tag, self.sim.now)

    def _deliver_dtmf(self, s, sender, receiver, sent, received, tag, sent_at):
        if s.state is not CallState.ANSWERED:
            self.sim.log(receiver.id, "dtmf-lost", s.id)
            return
        purpose = tag[0] if tag else None
        self.transfers.append(DtmfTransfer(s.id, purpose, sender.id, receiver.id, sent, received, sent_at,
                                           self.sim.now))
        if purpose in self.drop_purposes:
            self.sim.log(receiver.id, "dropped", s.id)
            return
        addressed = s.callee_number if receiver is s.callee else s.displayed.number
        self._check_wall(receiver, addressed)
        if self.sim.trace is not None:
            self.sim.log(receiver.id, "dtmf", f"{s.id} {received}")
        if purpose == "challenge":
            tag[1].stamp("challenge_received")
        receiver.handler.dtmf(s, received)

    def transfer(self, s: CallSession, target: Endpoint):
        """Hand a ringing call to another endpoint (PBX extension routing)."""
        s.callee.sessions.discard(s)
        s.callee = target
        target.sessions.add(s)
        self.sim.log(target.id, "transferred", s.id)
        target.handler.incoming(s)

    def ring(self, s: CallSession | None, ep: Endpoint, line: CallerLine, status: str, warning: str | None = None):
        event = RingEvent(self.sim.now, ep.id, s.id if s else "", line.number.digits, line.name, status, warning)
        self.rings.append(event)
        if self.sim.trace is not None:
            self.sim.log(ep.id, "ring", f"{event.session_id} {status}" + (f" ({warning})" if warning else ""))
        return event

    def teardown(self):
        """End every live session silently; used between independent trials on one network."""
        for s in self._live:
            s.state = CallState.ENDED
            if s.cdr.end_us is None:
                s.cdr.end_us = self.sim.now
            s.caller.sessions.discard(s)
            s.callee.sessions.discard(s)
        self._live.clear()
