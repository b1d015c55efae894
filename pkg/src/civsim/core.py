"""Domain values shared by every layer: phone numbers, caller lines, challenges."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass

MAX_NUMBER_DIGITS = 15
MAX_NAME_LENGTH = 15
SHORT_NUMBER_MAX = 4
CIV_FLAG = "*"
DEFAULT_CHALLENGE_DIGITS = 4

_DIGITS = "0123456789"


class CivError(Exception):
    """Base class for every error raised by civsim."""


class InvalidNumber(CivError, ValueError):
    pass


class NameTooLong(CivError, ValueError):
    pass


class InvalidLength(CivError, ValueError):
    pass


class NumberKind(str, enum.Enum):
    STANDARD = "standard"
    NONDIALABLE_SHORT = "nondialable-short"


class VerificationStatus(str, enum.Enum):
    VERIFIED = "Verified"
    NOT_VERIFIED = "NotVerified"
    NOT_ATTEMPTED = "NotAttempted"


@dataclass(frozen=True)
class PhoneNumber:
    digits: str

    def __post_init__(self):
        d = self.digits
        if not isinstance(d, str) or not d or len(d) > MAX_NUMBER_DIGITS:
            raise InvalidNumber(f"number must have 1-{MAX_NUMBER_DIGITS} digits: {d!r}")
        if d.strip(_DIGITS):
            raise InvalidNumber(f"number contains non-digit characters: {d!r}")

    @property
    def kind(self) -> NumberKind:
        if len(self.digits) <= SHORT_NUMBER_MAX:
            return NumberKind.NONDIALABLE_SHORT
        return NumberKind.STANDARD

    @property
    def is_short(self) -> bool:
        return len(self.digits) <= SHORT_NUMBER_MAX

    def __str__(self):
        return self.digits


@dataclass(frozen=True)
class CallerLine:
    """The number and name a call presents to the called party."""

    number: PhoneNumber
    name: str = ""

    def __post_init__(self):
        if len(self.name) > MAX_NAME_LENGTH:
            raise NameTooLong(f"caller name exceeds {MAX_NAME_LENGTH} characters: {self.name!r}")

    @property
    def civ_flag(self) -> bool:
        return self.name.endswith(CIV_FLAG)

    def with_flag(self) -> CallerLine:
        if self.civ_flag:
            return self
        return CallerLine(self.number, self.name + CIV_FLAG)

    def without_flag(self) -> CallerLine:
        return CallerLine(self.number, self.name.rstrip(CIV_FLAG))


@dataclass(frozen=True)
class Challenge:
    digits: str

    def __post_init__(self):
        if not self.digits or len(self.digits) > MAX_NUMBER_DIGITS or self.digits.strip(_DIGITS):
            raise InvalidLength(f"challenge must be 1-{MAX_NUMBER_DIGITS} decimal digits: {self.digits!r}")

    def __len__(self):
        return len(self.digits)

    def __str__(self):
        return self.digits


def parse_caller_line(raw_number: str, raw_name: str) -> CallerLine:
    """Validate a raw number/name pair into a :class:`CallerLine`.

    The CIV flag is kept in the stored name; ``civ_flag`` is derived from it.
    """
    return CallerLine(PhoneNumber(raw_number), raw_name)


def generate_challenge(n: int, rng: random.Random) -> Challenge:
    if not 1 <= n <= MAX_NUMBER_DIGITS:
        raise InvalidLength(f"challenge length must be in 1..{MAX_NUMBER_DIGITS}, got {n}")
    return Challenge("".join(rng.choices(_DIGITS, k=n)))


def verify_response(challenge: Challenge, response) -> VerificationStatus:
    if isinstance(response, str) and response == challenge.digits:
        return VerificationStatus.VERIFIED
    return VerificationStatus.NOT_VERIFIED


class NetworkKind(str, enum.Enum):
    PSTN = "pstn-analogue"
    CELLULAR = "cellular-cs"
    VOIP = "voip-sip"


@dataclass(frozen=True)
class PlatformProfile:
    """What a phone platform lets CIV do.

    Timing values are in milliseconds. DTMF recognition latency is a
    calibrated quantity and lives in the latency calibration, keyed by
    ``name``.
    """

    name: str
    can_modify_cli: bool
    can_send_incall_dtmf: bool
    has_call_waiting: bool
    network: NetworkKind
    dial_string_pause_ms: float = 2000.0
    mark_ms: float = 50.0
    space_ms: float = 50.0


SIP = PlatformProfile("sip", True, True, True, NetworkKind.VOIP, mark_ms=50.0, space_ms=50.0)
CELLULAR = PlatformProfile("cellular", False, False, True, NetworkKind.CELLULAR, mark_ms=100.0, space_ms=100.0)
LANDLINE_TRUECALL = PlatformProfile(
    "landline-truecall", False, True, False, NetworkKind.PSTN, mark_ms=100.0, space_ms=100.0
)
PROFILES = {p.name: p for p in (SIP, CELLULAR, LANDLINE_TRUECALL)}
