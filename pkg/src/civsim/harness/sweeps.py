"""Parameter sweeps: DTMF reliability over mark/space, transmission time over n."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from ..calibration import LatencyCalibration
from ..civ import Variant
from ..core import VerificationStatus
from ..dtmf import NoiseModel, TimingConfig, round_trip
from ..simnet import Scenario, Topology, run_scenario

MARKSPACE_SEED = 20
MARK_GRID_MS = (20.0, 30.0, 40.0, 50.0, 60.0, 80.0, 100.0)
# searched from clean towards noisy; the first match is the largest SNR
NOISE_GRID_DB = tuple(x / 2.0 for x in range(24, -1, -1))
PAIRS = tuple((a, b) for a in ("sip-a", "cellular-a", "landline-a") for b in ("sip-b", "cellular-b", "landline-b"))


def trial_rng(seed: int, i: int) -> np.random.Generator:
    # the same trial index gets the same code and noise stream at every sweep point
    return np.random.default_rng([seed, i])


def trial_code(rng: np.random.Generator, digits: int = 4) -> str:
    return "".join(str(d) for d in rng.integers(0, 10, size=digits))


def markspace_successes(mark_ms: float, space_ms: float, trials: int, snr_db: float,
                        seed: int = MARKSPACE_SEED) -> int:
    """Random 4-digit codes sent over one noisy analogue line, decoded by a receiver that assumes 40/40."""
    cfg = TimingConfig(mark_ms, space_ms)
    noise = NoiseModel.gaussian(snr_db)
    ok = 0
    for i in range(trials):
        rng = trial_rng(seed, i)
        code = trial_code(rng)
        ok += round_trip(code, cfg, noise, rng) == code
    return ok


def calibrate_noise(grid=NOISE_GRID_DB, trials: int = 20, seed: int = MARKSPACE_SEED) -> float:
    """Largest SNR on ``grid`` where 50/150 fails at least once in ``trials`` while 60/150 never fails."""
    for snr in sorted(grid, reverse=True):
        if (markspace_successes(50.0, 150.0, trials, snr, seed) < trials
                and markspace_successes(60.0, 150.0, trials, snr, seed) == trials):
            return float(snr)
    raise ValueError("no SNR on the grid separates mark 50 from mark 60")


def sweep_markspace(marks, spaces, trials: int, snr_db: float, seed: int = MARKSPACE_SEED, jobs: int = 1):
    from .reports import Report

    if trials < 20:
        raise ValueError("trials must be >= 20")
    points = [(float(m), float(s)) for s in spaces for m in marks]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            counts = list(pool.map(markspace_successes, *zip(*[(m, s, trials, snr_db, seed) for m, s in points])))
    else:
        counts = [markspace_successes(m, s, trials, snr_db, seed) for m, s in points]
    rep = Report("sweep-markspace", meta={"seed": seed, "snr_db": snr_db})
    for (m, s), ok in zip(points, counts):
        rep.add(mark_ms=m, space_ms=s, trials=trials, successes=ok, success_rate=ok / trials, snr_db=snr_db)
    return rep


def response_transmission_ms(topology: Topology, caller: str, callee: str, n: int, cal: LatencyCalibration,
                             seed: int = 0, variant: Variant | None = None) -> float:
    """Time from the caller starting to send an n-digit DTMF response to the callee having decoded it.

    This measures the channel, so the challenge timeout is lifted: long codes on
    the slowest paths would otherwise exceed it before the response lands.
    """
    metrics, _ = run_scenario(topology, Scenario(caller, callee, n=n, variant=variant), cal, seed=seed,
                              timeout_ms=math.inf, trace=False)
    if metrics.outcome != VerificationStatus.VERIFIED.value:
        raise RuntimeError(f"{caller}->{callee} n={n} did not verify: {metrics.outcome}")
    sent = [t for t in metrics.transfers if t.purpose == "response"]
    if not sent:
        raise RuntimeError(f"{caller}->{callee} sent no DTMF response")
    return (sent[0].received_us - sent[0].sent_us) / 1000.0


def linear_fit(xs, ys):
    fit = stats.linregress(xs, ys)
    r2 = fit.rvalue**2 if not math.isnan(fit.rvalue) else 1.0
    return float(fit.slope), float(fit.intercept), float(r2)


def sweep_n(topology: Topology, cal: LatencyCalibration, pairs=PAIRS, n_values=range(1, 9), seed: int = 0):
    from .reports import Report

    n_values = list(n_values)
    if not n_values or min(n_values) < 1 or max(n_values) > 15:
        raise ValueError("n must lie in 1..15")
    rep = Report("sweep-n", meta={"seed": seed})
    for caller, callee in pairs:
        times = [response_transmission_ms(topology, caller, callee, n, cal, seed) for n in n_values]
        slope, intercept, r2 = linear_fit(n_values, times)
        for n, t in zip(n_values, times):
            rep.add(caller=caller, callee=callee, n=n, transmission_ms=t, slope_ms_per_digit=slope,
                    intercept_ms=intercept, r_squared=r2)
    return rep
