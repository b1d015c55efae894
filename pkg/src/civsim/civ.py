"""Caller- and callee-side CIV state machines on top of :mod:`civsim.signaling`.

The callee picks a variant from what it can infer about the caller's
platform, sends the challenge to the *displayed* number and rings once the
response arrives or the timeout fires. Verification calls carry a caller
name ``CIV<code>[idx]`` where ``code`` tells the caller how to answer:

    D  in-call DTMF on the initial call
    C  abandoned call presenting the response as CLI
    N  new call carrying DTMF (in-call, or dial string if that is all it has)

``idx`` is the optional 3-digit PBX index echoed back from the caller name.
"""

from __future__ import annotations

import enum
import functools
import math
import re
from collections import deque
from dataclasses import dataclass, field

from .core import (
    DEFAULT_CHALLENGE_DIGITS,
    CallerLine,
    Challenge,
    CivError,
    NetworkKind,
    PhoneNumber,
    PlatformProfile,
    PROFILES,
    VerificationStatus,
    generate_challenge,
    verify_response,
)
from .signaling import (
    CallSession,
    CallState,
    Endpoint,
    Handler,
    MissedCallEvent,
    Network,
)

CHALLENGE_TIMEOUT_MS = 30_000.0
NAME_MARKER = "CIV"
UNVERIFIED_WARNING = "caller not verified"

# the callee only sees which network the call came from
PROFILE_BY_KIND = {p.network: p for p in PROFILES.values()}

_VERIF_NAME = re.compile(r"^CIV([DCNR])(\d{3})?$")
_PBX_INDEX = re.compile(r"(\d{3})\*$")


class Variant(str, enum.Enum):
    CLI_DTMF = "cli-dtmf"
    CLI_CLI = "cli-cli"
    DTMF_2SETUP = "dtmf-dtmf-2setup"
    DTMF_3SETUP = "dtmf-dtmf-3setup"

    @property
    def cli_challenge(self) -> bool:
        return self in (Variant.CLI_DTMF, Variant.CLI_CLI)

    @property
    def keeps_initial(self) -> bool:
        return self is not Variant.DTMF_3SETUP

    @property
    def instruction(self) -> str:
        return {"cli-dtmf": "D", "cli-cli": "C", "dtmf-dtmf-2setup": "D", "dtmf-dtmf-3setup": "N"}[self.value]


class MissedCallClass(str, enum.Enum):
    ORDINARY = "ordinary"
    UNSOLICITED = "unsolicited"


class Exhausted(CivError):
    pass


class UnknownIndex(CivError, KeyError):
    pass


def feasible_variants(caller: PlatformProfile, callee: PlatformProfile) -> list[Variant]:
    # holding the initial call needs call waiting on both ends: the callee to
    # hold it, the caller to take the verification call while it is up
    keep = callee.has_call_waiting and caller.has_call_waiting
    out = []
    if keep and callee.can_modify_cli and caller.can_send_incall_dtmf:
        out.append(Variant.CLI_DTMF)
    if keep and callee.can_modify_cli and caller.can_modify_cli:
        out.append(Variant.CLI_CLI)
    if keep and caller.can_send_incall_dtmf:
        out.append(Variant.DTMF_2SETUP)
    out.append(Variant.DTMF_3SETUP)
    return out


def select_variant(caller: PlatformProfile, callee: PlatformProfile) -> Variant:
    """Preferred feasible variant: cli-dtmf, then cli-cli, then the DTMF forms."""
    return feasible_variants(caller, callee)[0]


def recognize_verification_call(event: MissedCallEvent, n: int = DEFAULT_CHALLENGE_DIGITS, pending: bool = True):
    """Challenge carried by a missed call, or how to classify the call otherwise.

    Short non-dialable CLIs are recognised by format. Longer challenges
    (n > 4) are recognised only through the CIV caller-name marker.
    """
    cli = event.displayed_cli
    marked = parse_verification_name(event.displayed_name) is not None
    if not cli.is_short and not marked:
        return MissedCallClass.ORDINARY
    if pending and len(cli.digits) == n:
        return Challenge(cli.digits)
    return MissedCallClass.UNSOLICITED


def verification_name(code: str, index: str | None = None) -> str:
    return f"{NAME_MARKER}{code}{index or ''}"


@functools.lru_cache(maxsize=4096)
def parse_verification_name(name: str):
    """(code, index) for a verification call name, or None."""
    m = _VERIF_NAME.match(name)
    return (m.group(1), m.group(2)) if m else None


@dataclass(frozen=True)
class Breakdown:
    verification_setup_ms: float
    challenge_transmit_ms: float
    response_setup_ms: float
    response_transmit_ms: float

    def total(self) -> float:
        return self.verification_setup_ms + self.challenge_transmit_ms + self.response_setup_ms + self.response_transmit_ms

    def as_dict(self) -> dict:
        return {
            "verification_setup_ms": self.verification_setup_ms,
            "challenge_transmit_ms": self.challenge_transmit_ms,
            "response_setup_ms": self.response_setup_ms,
            "response_transmit_ms": self.response_transmit_ms,
        }


MILESTONES = ("verification_setup", "challenge_received", "response_channel")


@dataclass(eq=False)
class VerificationSession:
    initial_session_id: str
    challenge: Challenge
    variant: Variant
    callee: str
    displayed_number: str
    started_us: int
    outcome: VerificationStatus | None = None
    response: str | None = None
    timed_out: bool = False
    ended_us: int | None = None
    marks: dict = field(default_factory=dict)
    _clock: object = None

    def stamp(self, milestone: str, at: int | None = None):
        if milestone not in self.marks:
            self.marks[milestone] = self._clock() if at is None else at

    def set_outcome(self, status: VerificationStatus, at: int):
        if self.outcome is not None:
            raise CivError(f"outcome already set for {self.initial_session_id}")
        self.outcome = status
        self.ended_us = at

    @property
    def total_us(self) -> int:
        return self.ended_us - self.started_us

    def breakdown_us(self) -> tuple:
        """Four integer components; a missing milestone pushes the remaining time onto the step in progress."""
        points = [self.started_us]
        missing = False
        for name in MILESTONES:
            t = self.marks.get(name)
            if missing or t is None:
                missing = True
                t = self.ended_us
            points.append(t)
        points.append(self.ended_us)
        return tuple(b - a for a, b in zip(points, points[1:]))

    @property
    def breakdown(self) -> Breakdown:
        return Breakdown(*(us / 1000.0 for us in self.breakdown_us()))


@dataclass(frozen=True)
class CivConfig:
    n: int = DEFAULT_CHALLENGE_DIGITS
    timeout_ms: float = CHALLENGE_TIMEOUT_MS
    local_contacts: frozenset = frozenset()
    variant: Variant | None = None
    filter_unsolicited: bool = True


@dataclass(eq=False)
class _Incoming:
    vs: VerificationSession
    initial: CallSession
    caller_number: PhoneNumber
    code: str
    index: str | None
    verif: CallSession | None = None
    response_call: CallSession | None = None


@dataclass(eq=False)
class _Outgoing:
    initial: CallSession
    callee_number: PhoneNumber
    challenge: str | None = None
    code: str | None = None
    verif: CallSession | None = None
    response_call: CallSession | None = None
    waiting_resume: bool = False
    done: bool = False


class CivAgent(Handler):
    """CIV running on one endpoint, both as caller and as callee."""

    def __init__(self, network: Network, endpoint: Endpoint, config: CivConfig = CivConfig()):
        self.net = network
        self.sim = network.sim
        self.ep = endpoint
        self.config = config
        endpoint.handler = self
        self.verifying: dict[str, _Incoming] = {}
        self.queued: dict[str, deque] = {}
        self.outgoing: list[_Outgoing] = []
        self._by_session: dict = {}
        self.sessions: list[VerificationSession] = []
        self.filtered: list[MissedCallEvent | CallSession] = []
        self.ordinary_missed: list[MissedCallEvent] = []

    def reset(self):
        """Forget all protocol state; used between independent trials."""
        if not self._by_session and not self.filtered and not self.ordinary_missed:
            return
        self.verifying.clear()
        self.queued.clear()
        self.outgoing.clear()
        self._by_session.clear()
        self.sessions.clear()
        self.filtered.clear()
        self.ordinary_missed.clear()

    # caller side

    def call(self, number, presented: CallerLine | None = None, flag: bool = True) -> CallSession:
        line = self.ep.line if presented is None else presented
        if flag:
            line = line.with_flag()
        number = number if isinstance(number, PhoneNumber) else PhoneNumber(number)
        s = self.net.place_call(self.ep, number, line, tag=("initial",))
        out = _Outgoing(s, number)
        self.outgoing.append(out)
        self._by_session[s] = out
        return s

    def _awaiting(self, number: str | None = None) -> _Outgoing | None:
        for out in self.outgoing:
            if out.challenge is None and (number is None or out.callee_number.digits == number):
                return out
        return None

    def _respond(self, out: _Outgoing):
        prof = self.ep.profile
        code = out.code
        if code == "D" and prof.can_send_incall_dtmf and out.initial.alive:
            if out.initial.state is CallState.ANSWERED:
                self._finish_outgoing(out)
                self.net.send_dtmf(out.initial, self.ep, out.challenge, tag=("response",))
            else:
                out.waiting_resume = True
            return
        if code == "C" and prof.can_modify_cli:
            line = CallerLine(PhoneNumber(out.challenge), verification_name("R"))
            s = self.net.place_call(self.ep, out.callee_number, line, tag=("response",))
        elif prof.can_send_incall_dtmf:
            s = self.net.place_call(self.ep, out.callee_number, out.initial.caller_line, tag=("response",))
        else:
            s = self.net.place_call(self.ep, out.callee_number, out.initial.caller_line,
                                    dial_suffix=out.challenge, tag=("response",))
        out.response_call = s
        self._by_session[s] = out
        self._finish_outgoing(out)

    def _finish_outgoing(self, out: _Outgoing):
        out.done = True
        if out in self.outgoing:
            self.outgoing.remove(out)

    # callee side

    def _start(self, s: CallSession):
        line = s.displayed
        caller_prof = PROFILE_BY_KIND[s.path[0]]
        variant = self.config.variant
        if variant is None or variant not in feasible_variants(caller_prof, self.ep.profile):
            variant = select_variant(caller_prof, self.ep.profile)
        m = _PBX_INDEX.search(line.name)
        vs = VerificationSession(s.id, generate_challenge(self.config.n, self.sim.rng), variant, self.ep.id,
                                 line.number.digits, s.rang_at, _clock=lambda: self.sim.now)
        ctx = _Incoming(vs, s, line.number, variant.instruction, m.group(1) if m else None)
        self.sessions.append(vs)
        self.verifying[line.number.digits] = ctx
        self._by_session[s] = ctx
        if self.sim.trace is not None:
            self.sim.log(self.ep.id, "verify", f"{s.id} {variant.value}")
        if variant.keeps_initial:
            self.net.answer(s, self.ep)
        else:
            self.net.hangup(s, self.ep)
            self._place_verification(ctx)

    def _place_verification(self, ctx: _Incoming):
        vs = ctx.vs
        name = verification_name(ctx.code, ctx.index)
        digits = vs.challenge.digits
        try:
            if vs.variant.cli_challenge:
                v = self.net.place_call(self.ep, ctx.caller_number, CallerLine(PhoneNumber(digits), name),
                                        tag=("challenge", vs))
            elif self.ep.profile.can_send_incall_dtmf:
                v = self.net.place_call(self.ep, ctx.caller_number, CallerLine(self.ep.number, name),
                                        tag=("verification", vs))
            else:
                v = self.net.place_call(self.ep, ctx.caller_number, CallerLine(self.ep.number, name),
                                        dial_suffix=digits, tag=("challenge", vs))
        except CivError as exc:
            # unreachable or busy displayed number: nothing can verify it
            if self.sim.trace is not None:
                self.sim.log(self.ep.id, "verification-failed", f"{ctx.initial.id} {type(exc).__name__}")
            self._finish(ctx, None)
            return
        ctx.verif = v
        self._by_session[v] = ctx
        if math.isfinite(self.config.timeout_ms):
            self.sim.schedule(self.config.timeout_ms, self._timeout, ctx)

    def _timeout(self, ctx: _Incoming):
        if ctx.vs.outcome is None:
            ctx.vs.timed_out = True
            self.sim.log(self.ep.id, "timeout", ctx.initial.id)
            self._finish(ctx, None)

    def _finish(self, ctx: _Incoming, response: str | None, via_initial: bool = False):
        vs = ctx.vs
        if vs.outcome is not None:
            return
        now = self.sim.now
        if via_initial and "challenge_received" in vs.marks:
            vs.stamp("response_channel", vs.marks["challenge_received"])
        vs.response = response
        status = verify_response(vs.challenge, response)
        vs.set_outcome(status, now)
        v = ctx.verif
        if v is not None and v.alive:
            if v.state in (CallState.DIALING, CallState.RINGING):
                self.net.abandon(v)
            else:
                self.net.hangup(v, self.ep)
        warning = None if status is VerificationStatus.VERIFIED else UNVERIFIED_WARNING
        ring_on = ctx.initial if ctx.initial.alive else ctx.response_call
        self.net.ring(ring_on, self.ep, ctx.initial.displayed, status.value, warning)
        number = ctx.caller_number.digits
        if self.verifying.get(number) is ctx:
            del self.verifying[number]
        waiting = self.queued.get(number)
        while waiting:
            nxt = waiting.popleft()
            if nxt.state is CallState.RINGING:
                self._start(nxt)
                break

    def _ring_unattempted(self, s: CallSession):
        self.net.ring(s, self.ep, s.displayed, VerificationStatus.NOT_ATTEMPTED.value, UNVERIFIED_WARNING)

    # handler callbacks

    def incoming(self, s: CallSession):
        line = s.displayed
        number = line.number.digits
        parsed = parse_verification_name(line.name)
        if line.number.is_short:
            # CLI-carried challenge or response; it is abandoned while ringing
            return
        out = self._awaiting(number)
        if out is not None and (parsed is not None or out.initial.state is CallState.ENDED):
            out.verif = s
            out.code = parsed[0] if parsed else None
            self._by_session[s] = out
            self.net.answer(s, self.ep)
            return
        if parsed is not None:
            code = parsed[0]
            if code == "R" and any(c.code == "C" for c in self.verifying.values()):
                return
            if code != "R" and len(number) == self.config.n and self._awaiting() is not None:
                # long CLI-carried challenge; it is abandoned while ringing
                return
            self.filtered.append(s)
            self.sim.log(self.ep.id, "filtered", s.id)
            if self.config.filter_unsolicited:
                self.net.hangup(s, self.ep)
            return
        ctx = self.verifying.get(number)
        if ctx is not None:
            if ctx.code == "N" and ctx.response_call is None and ctx.verif is not None:
                ctx.response_call = s
                self._by_session[s] = ctx
                self.net.answer(s, self.ep)
            else:
                self.queued.setdefault(number, deque()).append(s)
            return
        if line.civ_flag or number in self.config.local_contacts:
            self._start(s)
        else:
            self._ring_unattempted(s)

    def ringing(self, s: CallSession):
        ctx = self._by_session.get(s)
        if isinstance(ctx, _Incoming) and s is ctx.verif and ctx.vs.variant.cli_challenge:
            ctx.vs.stamp("verification_setup")
            self.net.abandon(s)
            if ctx.code == "D" and ctx.initial.state is CallState.HELD:
                self.net.resume(ctx.initial, self.ep)
        elif isinstance(ctx, _Outgoing) and s is ctx.response_call and ctx.code == "C":
            self.net.abandon(s)

    def answered(self, s: CallSession):
        ctx = self._by_session.get(s)
        if isinstance(ctx, _Incoming):
            if ctx.vs.outcome is not None:
                return
            if s is ctx.initial and s.callee is self.ep:
                self.net.hold(s, self.ep)
                self._place_verification(ctx)
            elif s is ctx.verif and s.caller is self.ep:
                ctx.vs.stamp("verification_setup")
                if s.dial_suffix is None:
                    self.net.send_dtmf(s, self.ep, ctx.vs.challenge.digits, tag=("challenge", ctx.vs))
            elif s is ctx.response_call and s.callee is self.ep:
                ctx.vs.stamp("response_channel")
        elif isinstance(ctx, _Outgoing):
            if s is ctx.response_call and s.caller is self.ep and s.dial_suffix is None:
                self.net.send_dtmf(s, self.ep, ctx.challenge, tag=("response",))

    def ended(self, s: CallSession, by):
        ctx = self._by_session.get(s)
        if isinstance(ctx, _Incoming) and s is ctx.verif and ctx.vs.outcome is None:
            if ctx.code == "D" and ctx.initial.state is CallState.HELD:
                self.net.resume(ctx.initial, self.ep)

    def resumed(self, s: CallSession):
        ctx = self._by_session.get(s)
        if isinstance(ctx, _Outgoing) and ctx.waiting_resume and s is ctx.initial and s.caller is self.ep:
            ctx.waiting_resume = False
            self._finish_outgoing(ctx)
            self.net.send_dtmf(s, self.ep, ctx.challenge, tag=("response",))

    def dtmf(self, s: CallSession, digits: str):
        ctx = self._by_session.get(s)
        if isinstance(ctx, _Incoming):
            if s is ctx.initial or s is ctx.response_call:
                self._finish(ctx, digits, via_initial=s is ctx.initial)
        elif isinstance(ctx, _Outgoing) and s is ctx.verif and ctx.challenge is None:
            ctx.challenge = digits
            if ctx.code is None:
                ctx.code = "D" if ctx.initial.alive else "N"
            self.net.hangup(s, self.ep)
            self._respond(ctx)

    def missed_call(self, event: MissedCallEvent):
        parsed = parse_verification_name(event.displayed_name)
        code = parsed[0] if parsed else None
        if code == "R":
            for ctx in self.verifying.values():
                if ctx.code == "C" and ctx.vs.outcome is None and "challenge_received" in ctx.vs.marks:
                    ctx.vs.stamp("response_channel")
                    self._finish(ctx, event.displayed_cli.digits)
                    return
        out = self._awaiting()
        kind = recognize_verification_call(event, self.config.n, out is not None and code != "R")
        if kind is MissedCallClass.ORDINARY and code is not None:
            kind = MissedCallClass.UNSOLICITED
        if isinstance(kind, Challenge):
            out.challenge = kind.digits
            out.code = code or "D"
            self._respond(out)
        elif kind is MissedCallClass.UNSOLICITED:
            self.filtered.append(event)
            self.sim.log(self.ep.id, "filtered", event.session_id)
        else:
            self.ordinary_missed.append(event)


@dataclass
class PbxState:
    """Outbound calls of one organisation number, keyed by a random 3-digit index."""

    org_number: PhoneNumber
    org_name: str = ""
    active: dict = field(default_factory=dict)
    max_draws: int = 64

    def register(self, extension: str, rng) -> str:
        if len(self.active) >= 1000:
            raise Exhausted("1000 outbound calls already active")
        for _ in range(self.max_draws):
            index = f"{rng.randrange(1000):03d}"
            if index not in self.active:
                break
        else:
            free = [i for i in range(1000) if f"{i:03d}" not in self.active]
            index = f"{rng.choice(free):03d}"
        self.active[index] = extension
        return index

    def release(self, index: str):
        self.active.pop(index, None)

    def extension_for(self, index) -> str:
        try:
            return self.active[index]
        except KeyError:
            raise UnknownIndex(f"no active outbound call with index {index!r}") from None

    def outbound_line(self, index: str) -> CallerLine:
        return CallerLine(self.org_number, f"{self.org_name[:11]}{index}*")


def pbx_register_outbound(pbx: PbxState, extension: str, rng) -> str:
    return pbx.register(extension, rng)


def pbx_forward_challenge(pbx: PbxState, event: MissedCallEvent, agents: dict) -> bool:
    """Hand a CLI challenge to the extension named by the index in the event's caller name."""
    parsed = parse_verification_name(event.displayed_name)
    try:
        if parsed is None or parsed[1] is None:
            raise UnknownIndex(event.displayed_name)
        ext = pbx.extension_for(parsed[1])
    except UnknownIndex:
        return False
    agents[ext].missed_call(event)
    return True


class PbxAgent(Handler):
    """The organisation endpoint: routes verification traffic to the right extension."""

    def __init__(self, network: Network, endpoint: Endpoint, org_name: str = ""):
        self.net = network
        self.ep = endpoint
        endpoint.handler = self
        self.state = PbxState(endpoint.number, org_name or endpoint.name)
        self.extensions: dict[str, CivAgent] = {}
        self.dropped: list = []

    def add_extension(self, agent: CivAgent):
        self.extensions[agent.ep.id] = agent

    def call_from(self, agent: CivAgent, number) -> CallSession:
        index = self.state.register(agent.ep.id, self.net.sim.rng)
        s = agent.call(number, presented=self.state.outbound_line(index))
        s.on_end.append(lambda _s, idx=index: self.state.release(idx))
        return s

    def missed_call(self, event: MissedCallEvent):
        if not pbx_forward_challenge(self.state, event, self.extensions):
            self.dropped.append(event)
            self.net.sim.log(self.ep.id, "dropped", event.session_id)

    def incoming(self, s: CallSession):
        parsed = parse_verification_name(s.displayed.name)
        if parsed is None or parsed[1] is None:
            if not s.displayed.number.is_short:
                self.net.ring(s, self.ep, s.displayed, VerificationStatus.NOT_ATTEMPTED.value, UNVERIFIED_WARNING)
            return
        try:
            ext = self.state.extension_for(parsed[1])
        except UnknownIndex:
            self.dropped.append(s)
            self.net.hangup(s, self.ep)
            return
        self.net.transfer(s, self.extensions[ext].ep)
