import random

import numpy as np
import pytest
from scipy import stats

from civsim.core import (
    CallerLine,
    Challenge,
    InvalidLength,
    InvalidNumber,
    NameTooLong,
    PhoneNumber,
    VerificationStatus,
    generate_challenge,
    parse_caller_line,
    verify_response,
)


def test_flag_from_trailing_star():
    line = parse_caller_line("5551234567", "Alice*")
    assert line.number == PhoneNumber("5551234567")
    assert line.name == "Alice*"
    assert line.civ_flag


def test_plain_name_has_no_flag():
    assert not parse_caller_line("5551234567", "Bob").civ_flag


@pytest.mark.parametrize("raw", ["555-ABC", "", "1234567890123456"])
def test_bad_numbers(raw):
    with pytest.raises(InvalidNumber):
        parse_caller_line(raw, "Alice")


def test_name_limit():
    with pytest.raises(NameTooLong):
        CallerLine(PhoneNumber("5551234567"), "x" * 16)


def test_flag_toggling_round_trips():
    line = CallerLine(PhoneNumber("5551234567"), "Alice")
    assert line.with_flag().name == "Alice*"
    assert line.with_flag().with_flag() == line.with_flag()
    assert line.with_flag().without_flag() == line


def test_short_numbers():
    assert PhoneNumber("0391").is_short
    assert not PhoneNumber("5551234567").is_short


def test_challenge_length_contract():
    c = generate_challenge(4, random.Random(1))
    assert len(c) == 4 and c.digits.isdigit()


@pytest.mark.parametrize("n", [0, 16, -1])
def test_challenge_length_rejected(n):
    with pytest.raises(InvalidLength):
        generate_challenge(n, random.Random(0))


def test_challenge_digits_uniform():
    # chi-square goodness of fit over 10^6 four-digit draws
    rng = random.Random(12345)
    counts = np.zeros((4, 10), dtype=np.int64)
    for _ in range(1_000_000):
        for pos, d in enumerate(generate_challenge(4, rng).digits):
            counts[pos, ord(d) - 48] += 1
    for pos in range(4):
        assert stats.chisquare(counts[pos]).pvalue > 0.01
    assert stats.chisquare(counts.sum(axis=0)).pvalue > 0.01


@pytest.mark.parametrize("response,expected", [
    ("1234", VerificationStatus.VERIFIED),
    ("1235", VerificationStatus.NOT_VERIFIED),
    ("123", VerificationStatus.NOT_VERIFIED),
    (None, VerificationStatus.NOT_VERIFIED),
])
def test_verify_response(response, expected):
    assert verify_response(Challenge("1234"), response) is expected
