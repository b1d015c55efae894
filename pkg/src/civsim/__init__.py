"""Caller ID verification: protocol, heterogeneous telephony simulator and harness."""

from .core import (
    CallerLine,
    Challenge,
    PhoneNumber,
    VerificationStatus,
    generate_challenge,
    parse_caller_line,
    verify_response,
)

__all__ = [
    "CallerLine",
    "Challenge",
    "PhoneNumber",
    "VerificationStatus",
    "generate_challenge",
    "parse_caller_line",
    "verify_response",
]
