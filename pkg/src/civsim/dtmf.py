"""DTMF codec: tone synthesis, Goertzel decoding, line noise and timing.

Audio is float64 in [-1, 1] at 8 kHz unless told otherwise. Digital DTMF
(RTP events, out-of-band messages) is modeled as a plain symbol sequence
with durations and never touches audio.
"""

from __future__ import annotations

import enum
import math
import wave
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import CivError

SAMPLE_RATE = 8000
LOW_GROUP = (697.0, 770.0, 852.0, 941.0)
HIGH_GROUP = (1209.0, 1336.0, 1477.0, 1633.0)
FREQUENCIES = LOW_GROUP + HIGH_GROUP

_KEYPAD = ("123A", "456B", "789C", "*0#D")
SYMBOL_FREQS = {
    sym: (LOW_GROUP[row], HIGH_GROUP[col])
    for row, keys in enumerate(_KEYPAD)
    for col, sym in enumerate(keys)
}
_PAIR_SYMBOL = {(row, col): sym for row, keys in enumerate(_KEYPAD) for col, sym in enumerate(keys)}

RFC4733_MIN_MS = 40.0
TONE_AMPLITUDE = 0.5
# mean power of one synthesized dual tone (two sinusoids of TONE_AMPLITUDE)
TONE_POWER = TONE_AMPLITUDE**2

DOMINANCE_DB = 8.0
# fraction of frame power the detected pair must carry
MIN_PAIR_FRACTION = 0.5


class InvalidSymbol(CivError, ValueError):
    pass


class PathKind(str, enum.Enum):
    ANALOGUE_INBAND = "analogue-inband"
    DIGITAL_EVENT = "digital-event"
    OUT_OF_BAND = "out-of-band"


@dataclass(frozen=True)
class TimingConfig:
    mark_ms: float = 50.0
    space_ms: float = 50.0

    def __post_init__(self):
        if self.mark_ms <= 0 or self.space_ms <= 0:
            raise ValueError(f"mark/space must be positive: {self.mark_ms}/{self.space_ms}")

    @property
    def digital_compliant(self) -> bool:
        return self.mark_ms >= RFC4733_MIN_MS and self.space_ms >= RFC4733_MIN_MS


SIP_TIMING = TimingConfig(50.0, 50.0)
TRUECALL_TIMING = TimingConfig(100.0, 100.0)
# what a receiver assumes when it does not know the sender's timing
RECEIVER_TIMING = TimingConfig(RFC4733_MIN_MS, RFC4733_MIN_MS)


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __len__(self):
        return len(self.samples)

    @property
    def duration_ms(self) -> float:
        return 1000.0 * len(self.samples) / self.sample_rate


class NoiseKind(str, enum.Enum):
    NONE = "none"
    GAUSSIAN = "additive-gaussian"


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind = NoiseKind.NONE
    snr_db: float = math.inf

    @classmethod
    def gaussian(cls, snr_db: float) -> NoiseModel:
        return cls(NoiseKind.GAUSSIAN, float(snr_db))

    @property
    def is_clean(self) -> bool:
        return self.kind is NoiseKind.NONE or math.isinf(self.snr_db)


CLEAN = NoiseModel()


@dataclass(frozen=True)
class DtmfEventSequence:
    """Digitally signaled DTMF: (symbol, duration_ms) pairs, no audio."""

    events: tuple[tuple[str, float], ...]

    @classmethod
    def from_digits(cls, digits: str, cfg: TimingConfig = SIP_TIMING) -> DtmfEventSequence:
        _check_symbols(digits)
        return cls(tuple((d, cfg.mark_ms) for d in digits))

    @property
    def digits(self) -> str:
        return "".join(sym for sym, _ in self.events)


@dataclass(frozen=True)
class PathCost:
    overhead_ms: float
    per_digit_ms: float


def _check_symbols(digits: str):
    bad = [c for c in digits if c not in SYMBOL_FREQS]
    if bad:
        raise InvalidSymbol(f"not DTMF symbols: {''.join(bad)!r}")


def _n_samples(ms: float, rate: int) -> int:
    return int(round(ms * rate / 1000.0))


def synthesize(digits: str, cfg: TimingConfig = SIP_TIMING, sample_rate: int = SAMPLE_RATE) -> AudioBuffer:
    """Render ``digits`` as mark-length dual tones each followed by a space of silence."""
    _check_symbols(digits)
    mark = _n_samples(cfg.mark_ms, sample_rate)
    space = _n_samples(cfg.space_ms, sample_rate)
    out = np.zeros(len(digits) * (mark + space))
    t = np.arange(mark) / sample_rate
    for i, sym in enumerate(digits):
        lo, hi = SYMBOL_FREQS[sym]
        start = i * (mark + space)
        out[start:start + mark] = TONE_AMPLITUDE * (np.sin(2 * np.pi * lo * t) + np.sin(2 * np.pi * hi * t))
    return AudioBuffer(out, sample_rate)


def goertzel_power(frames: np.ndarray, freq: float, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Squared magnitude at ``freq`` for each row of ``frames`` via the Goertzel recurrence."""
    frames = np.atleast_2d(np.asarray(frames, dtype=float))
    coeff = 2.0 * math.cos(2.0 * math.pi * freq / sample_rate)
    s1 = np.zeros(frames.shape[0])
    s2 = np.zeros(frames.shape[0])
    for col in frames.T:
        s1, s2 = col + coeff * s1 - s2, s1
    return s1 * s1 + s2 * s2 - coeff * s1 * s2


def _goertzel_bank(frames: np.ndarray, sample_rate: int) -> np.ndarray:
    # all eight bins at once; columns follow FREQUENCIES
    coeff = 2.0 * np.cos(2.0 * np.pi * np.asarray(FREQUENCIES) / sample_rate)
    s1 = np.zeros((frames.shape[0], len(FREQUENCIES)))
    s2 = np.zeros_like(s1)
    for col in frames.T:
        s1, s2 = col[:, None] + coeff * s1 - s2, s1
    return s1 * s1 + s2 * s2 - coeff * s1 * s2


def frame_symbols(audio: AudioBuffer, cfg: TimingConfig = RECEIVER_TIMING):
    """Per-frame detections. Returns (symbols, frame_len, hop) where symbols holds None for no tone."""
    rate = audio.sample_rate
    frame_len = max(8, _n_samples(cfg.mark_ms / 2.0, rate))
    hop = max(1, frame_len // 8)
    # half-frame padding lets a tone at either edge be seen as fully as a mid-buffer one
    pad = np.zeros(frame_len // 2)
    x = np.concatenate([pad, np.asarray(audio.samples, dtype=float), pad])
    frames = np.lib.stride_tricks.sliding_window_view(x, frame_len)[::hop]
    tone = 2.0 * _goertzel_bank(frames, rate) / frame_len**2
    mean_power = np.mean(frames * frames, axis=1)

    lo = np.argmax(tone[:, :4], axis=1)
    hi = np.argmax(tone[:, 4:], axis=1)
    rows = np.arange(len(tone))
    p_lo = tone[rows, lo]
    p_hi = tone[rows, 4 + hi]
    rest = tone.copy()
    rest[rows, lo] = -np.inf
    rest[rows, 4 + hi] = -np.inf
    strongest_other = rest.max(axis=1)
    dominant = np.minimum(p_lo, p_hi) >= strongest_other * 10 ** (DOMINANCE_DB / 10.0)
    carries = (p_lo + p_hi) >= MIN_PAIR_FRACTION * mean_power
    audible = (p_lo + p_hi) > 1e-9
    hit = dominant & carries & audible
    symbols = [_PAIR_SYMBOL[(int(a), int(b))] if h else None for a, b, h in zip(lo, hi, hit)]
    return symbols, frame_len, hop


def decode(audio: AudioBuffer, cfg: TimingConfig = RECEIVER_TIMING) -> str:
    """Decode in-band DTMF.

    ``cfg`` is the receiver's expectation of the shortest mark and space:
    frames are mark/2 long, a tone is accepted once its detected extent
    reaches mark minus a quarter frame, and gaps shorter than space/2 do
    not split a tone. Segments that never qualify are skipped.
    """
    symbols, frame_len, hop = frame_symbols(audio, cfg)
    min_extent = _n_samples(cfg.mark_ms, audio.sample_rate) - frame_len / 4.0
    # noise dropouts shorter than half the minimum space are bridged
    max_dropout = max(1, int(_n_samples(cfg.space_ms / 2.0, audio.sample_rate) // hop))

    out = []
    current, first, last = None, 0, 0

    def close():
        if current is not None and (last - first) * hop >= min_extent:
            out.append(current)

    for i, sym in enumerate(symbols):
        if sym is None:
            if current is not None and i - last > max_dropout:
                close()
                current = None
            continue
        if sym == current and i - last <= max_dropout + 1:
            last = i
            continue
        close()
        current, first, last = sym, i, i
    close()
    return "".join(out)


def apply_noise(audio: AudioBuffer, model: NoiseModel, rng: np.random.Generator) -> AudioBuffer:
    """Add white gaussian noise whose power sits ``snr_db`` below one dual tone."""
    if model.is_clean:
        return audio
    sigma = math.sqrt(TONE_POWER / 10 ** (model.snr_db / 10.0))
    noisy = audio.samples + rng.normal(0.0, sigma, size=len(audio.samples))
    return AudioBuffer(noisy, audio.sample_rate)


def transmission_time(num_digits: int, path: PathKind, cfg: TimingConfig, cost: PathCost) -> float:
    """Milliseconds to move ``num_digits`` symbols over ``path``.

    Affine in the digit count. Analogue paths pay real signal time
    (mark + space) on top of the calibrated per-digit cost.
    """
    if num_digits < 0:
        raise ValueError("num_digits must be >= 0")
    path = PathKind(path)
    per_digit = cost.per_digit_ms
    if path is PathKind.ANALOGUE_INBAND:
        per_digit += cfg.mark_ms + cfg.space_ms
    return cost.overhead_ms + num_digits * per_digit


def round_trip(digits: str, cfg: TimingConfig, noise: NoiseModel = CLEAN, rng: np.random.Generator | None = None,
               receiver: TimingConfig = RECEIVER_TIMING, sample_rate: int = SAMPLE_RATE) -> str:
    """Synthesize, pass through the line, decode."""
    audio = synthesize(digits, cfg, sample_rate)
    if not noise.is_clean:
        if rng is None:
            raise ValueError("a noisy line needs an rng")
        audio = apply_noise(audio, noise, rng)
    return decode(audio, receiver)


def write_wav(audio: AudioBuffer, path) -> None:
    """Debug export as 16-bit mono PCM."""
    pcm = np.clip(np.round(np.asarray(audio.samples) * 32767), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(audio.sample_rate)
        w.writeframes(pcm.tobytes())


def success_rate(codes: Iterable[str], cfg: TimingConfig, noise: NoiseModel, rngs) -> float:
    codes = list(codes)
    ok = sum(round_trip(code, cfg, noise, rng) == code for code, rng in zip(codes, rngs))
    return ok / len(codes) if codes else 0.0
