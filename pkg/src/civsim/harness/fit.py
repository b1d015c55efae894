"""Fit a latency calibration to measured end-to-end totals.

Every total is an affine function of the calibration parameters (the
simulator only adds durations), so the fitter probes the simulator once per
parameter to get the design matrix, then solves a bounded least-squares
problem: relative target error plus a weak pull towards prior values that
pins parameters the targets do not determine. The result is re-simulated
and rejected if any target is off by more than the tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import lsq_linear

from ..calibration import PARAMETERS, ConfigError, LatencyCalibration, load_json
from ..core import CivError, VerificationStatus
from ..civ import Variant
from ..simnet import Scenario, Topology, run_scenario

TARGETS_SCHEMA = "civsim.targets/1"
BOUNDS_SCHEMA = "civsim.bounds/1"
PROBE_STEP_MS = 100.0
PRIOR_WEIGHT = 1e-3
TOLERANCE = 0.05


class Infeasible(CivError):
    pass


class FitError(CivError):
    pass


@dataclass(frozen=True)
class Target:
    name: str
    caller: str
    callee: str
    total_ms: float
    variant: Variant | None = None

    def scenario(self) -> Scenario:
        return Scenario(self.caller, self.callee, variant=self.variant)


@dataclass(frozen=True)
class Bounds:
    lower: dict
    upper: dict
    priors: dict
    noise_snr_db: float = math.inf
    noise_sweep: dict | None = None

    def prior_calibration(self) -> LatencyCalibration:
        return LatencyCalibration(dict(self.priors), noise_snr_db=self.noise_snr_db)


def load_targets(path) -> list[Target]:
    doc = load_json(path)
    if doc.get("schema") != TARGETS_SCHEMA:
        raise ConfigError(f"expected schema {TARGETS_SCHEMA!r}", f"{path}.schema")
    out = []
    for i, raw in enumerate(doc.get("targets", [])):
        where = f"{path}.targets[{i}]"
        try:
            variant = raw.get("variant")
            out.append(Target(raw["name"], raw["caller"], raw["callee"], float(raw["total_ms"]),
                              Variant(variant) if variant else None))
        except KeyError as exc:
            raise ConfigError(f"missing field {exc.args[0]!r}", where) from None
        except ValueError as exc:
            raise ConfigError(str(exc), where) from None
    if not out:
        raise ConfigError("no targets", str(path))
    return out


def load_bounds(path) -> Bounds:
    doc = load_json(path)
    if doc.get("schema") != BOUNDS_SCHEMA:
        raise ConfigError(f"expected schema {BOUNDS_SCHEMA!r}", f"{path}.schema")
    priors = doc.get("priors", {})
    missing = [p for p in PARAMETERS if p not in priors]
    if missing:
        raise ConfigError(f"priors missing {missing}", f"{path}.priors")
    lower, upper = {}, {}
    default = doc.get("default_bounds", [0.0, 60000.0])
    for p in PARAMETERS:
        lo, hi = doc.get("bounds", {}).get(p, default)
        if not 0 <= lo <= hi:
            raise ConfigError(f"invalid bounds [{lo}, {hi}]", f"{path}.bounds.{p}")
        if not lo <= priors[p] <= hi:
            raise ConfigError(f"prior {priors[p]} outside [{lo}, {hi}]", f"{path}.priors.{p}")
        lower[p], upper[p] = float(lo), float(hi)
    snr = doc.get("noise_snr_db")
    sweep = doc.get("noise_sweep")
    if sweep is not None and not isinstance(sweep, dict):
        raise ConfigError("must be an object", f"{path}.noise_sweep")
    return Bounds(lower, upper, {p: float(priors[p]) for p in PARAMETERS},
                  math.inf if snr is None else float(snr), sweep)


def fitted_noise(bounds: Bounds) -> float:
    if bounds.noise_sweep is None:
        return bounds.noise_snr_db
    from .sweeps import MARKSPACE_SEED, NOISE_GRID_DB, calibrate_noise

    sw = bounds.noise_sweep
    return calibrate_noise(tuple(sw.get("snr_grid_db", NOISE_GRID_DB)), int(sw.get("trials", 20)),
                           int(sw.get("seed", MARKSPACE_SEED)))


def simulate_total(topology: Topology, target: Target, cal: LatencyCalibration, timeout_ms: float | None = None) -> float:
    metrics, _ = run_scenario(topology, target.scenario(), cal, seed=0, timeout_ms=timeout_ms, trace=False)
    if metrics.outcome != VerificationStatus.VERIFIED.value:
        raise FitError(f"target {target.name!r} did not verify under the probe calibration ({metrics.outcome})")
    return metrics.total_ms


def design_matrix(topology: Topology, targets, base: LatencyCalibration, step: float = PROBE_STEP_MS):
    """(base totals, d total / d parameter) from one probe run per parameter; no timeout while probing."""
    c0 = np.array([simulate_total(topology, t, base, math.inf) for t in targets])
    A = np.zeros((len(targets), len(PARAMETERS)))
    for j, p in enumerate(PARAMETERS):
        probe = base.with_values(**{p: base[p] + step})
        A[:, j] = [(simulate_total(topology, t, probe, math.inf) - c) / step for t, c in zip(targets, c0)]
    return c0, A


def fit_calibration(topology: Topology, targets, bounds: Bounds, tolerance: float = TOLERANCE):
    """Returns (calibration, [(target, simulated_ms, relative residual)])."""
    base = bounds.prior_calibration()
    x0 = np.array([bounds.priors[p] for p in PARAMETERS])
    lo = np.array([bounds.lower[p] for p in PARAMETERS])
    hi = np.array([bounds.upper[p] for p in PARAMETERS])
    c0, A = design_matrix(topology, targets, base)
    t = np.array([tg.total_ms for tg in targets])

    # reachable range of each total inside the box
    offset = c0 - A @ x0
    t_min = offset + np.where(A > 0, A * lo, A * hi).sum(axis=1)
    t_max = offset + np.where(A > 0, A * hi, A * lo).sum(axis=1)
    for tg, a, b in zip(targets, t_min, t_max):
        if not a <= tg.total_ms <= b:
            raise Infeasible(f"target {tg.name!r} = {tg.total_ms:g} ms outside reachable [{a:.1f}, {b:.1f}] ms")

    w = 1.0 / t
    scale = np.maximum(x0, 1.0)
    M = np.vstack([A * w[:, None], np.diag(PRIOR_WEIGHT / scale)])
    rhs = np.concatenate([(t - offset) * w, PRIOR_WEIGHT * x0 / scale])
    sol = lsq_linear(M, rhs, bounds=(lo, hi), method="bvls")
    x = np.clip(np.round(sol.x, 3), lo, hi)

    cal = LatencyCalibration({p: float(v) for p, v in zip(PARAMETERS, x)}, noise_snr_db=fitted_noise(bounds))
    residuals = []
    for tg in targets:
        try:
            sim = simulate_total(topology, tg, cal)
        except FitError:
            sim = math.nan
        residuals.append((tg, sim, abs(sim - tg.total_ms) / tg.total_ms))
    bad = [(tg.name, r) for tg, _, r in residuals if not r <= tolerance]
    if bad:
        raise FitError(f"residual above {tolerance:.0%} for {bad}")
    return cal, residuals
