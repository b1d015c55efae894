"""The five harness commands. Each returns a :class:`Report` and optionally writes it."""

from __future__ import annotations

from pathlib import Path

from ..calibration import ConfigError, LatencyCalibration, data_path, default_calibration
from ..core import VerificationStatus
from ..engine import trace_lines
from ..simnet import (
    AttackSetup,
    Scenario,
    Topology,
    default_topology,
    parse_strategy,
    run_attack,
    run_scenario,
)
from .fit import fit_calibration, load_bounds, load_targets
from .reports import BREAKDOWN_COLUMNS, Report
from .sweeps import MARK_GRID_MS, MARKSPACE_SEED, PAIRS, sweep_markspace, sweep_n

ATTACK_SEED = 1


def resolve_calibration(path=None) -> LatencyCalibration:
    return default_calibration() if path is None else LatencyCalibration.load(path)


def resolve_topology(path=None, scenario_path=None, scenario: Scenario | None = None) -> Topology:
    if path is not None:
        return Topology.load(path)
    if scenario is not None and scenario.topology:
        ref = Path(scenario.topology)
        if not ref.is_absolute() and scenario_path is not None:
            ref = Path(scenario_path).parent / ref
        if not ref.exists():
            ref = data_path(scenario.topology)
        return Topology.load(ref)
    return default_topology()


def _one_run(args):
    topology, scenario, cal, seed = args
    metrics, trace = run_scenario(topology, scenario, cal, seed=seed)
    # the live session holds a clock callback; reports only need its breakdown
    metrics.verification = None
    return metrics, trace_lines(trace)


def run_repeats(topology: Topology, scenario: Scenario, cal: LatencyCalibration, seed: int | None = None,
                jobs: int = 1):
    """Run ``scenario.repeat`` times with seeds base, base+1, ...; results in seed order."""
    scenario.check(topology)
    base = scenario.seed if seed is None else seed
    work = [(topology, scenario, cal, base + i) for i in range(scenario.repeat)]
    if jobs > 1 and len(work) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_one_run, work))
    return [_one_run(w) for w in work]


def run_report(results) -> Report:
    rep = Report("run")
    verified = 0
    for i, (m, _) in enumerate(results):
        ok = m.outcome == VerificationStatus.VERIFIED.value
        verified += ok
        parts = m.breakdown.as_dict() if m.breakdown is not None else {c: None for c in BREAKDOWN_COLUMNS}
        rep.add(row=str(i), seed=m.seed, caller=m.caller, callee=m.callee, variant=m.variant, outcome=m.outcome,
                warning=m.warning, total_ms=m.total_ms, call_setups=m.call_setups, success_rate=float(ok), **parts)
    if results:
        ms = [m for m, _ in results]
        avg = {c: _mean([m.breakdown.as_dict()[c] for m in ms if m.breakdown is not None]) for c in BREAKDOWN_COLUMNS}
        rep.add(row="average", caller=ms[0].caller, callee=ms[0].callee, variant=ms[0].variant,
                total_ms=_mean([m.total_ms for m in ms]), call_setups=_mean([float(m.call_setups) for m in ms]),
                success_rate=verified / len(ms), **avg)
    return rep


def _mean(xs):
    return sum(xs) / len(xs) if xs else None


def cmd_run(scenario_path, calibration_path=None, output_path=None, topology_path=None, seed=None, jobs=1):
    scenario = Scenario.load(scenario_path)
    topology = resolve_topology(topology_path, scenario_path, scenario)
    results = run_repeats(topology, scenario, resolve_calibration(calibration_path), seed, jobs)
    rep = run_report(results)
    rep.meta = {"scenario": Path(scenario_path).name, "seed": scenario.seed if seed is None else seed,
                "repeat": scenario.repeat}
    if output_path is not None:
        paths = rep.write(output_path)
        trace_path = paths[0].with_name(paths[0].name[:-len(".csv")] + ".trace.jsonl")
        trace_path.write_text("".join(f"run={i} {line}\n" for i, (_, lines) in enumerate(results) for line in lines))
    return rep


def parse_pairs(text: str | None):
    if not text:
        return PAIRS
    out = []
    for item in text.split(","):
        caller, sep, callee = item.partition(":")
        if not sep or not caller or not callee:
            raise ConfigError(f"pair {item!r} is not caller:callee", "--pairs")
        out.append((caller, callee))
    return tuple(out)


def parse_range(text: str) -> list[int]:
    lo, sep, hi = text.partition("-")
    try:
        values = list(range(int(lo), int(hi) + 1)) if sep else [int(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad range {text!r}", "--n") from None
    if not values or min(values) < 1 or max(values) > 15:
        raise ConfigError("n must lie in 1..15", "--n")
    return values


def cmd_sweep_n(scenario_path=None, n_range=range(1, 9), output_path=None, calibration_path=None,
                topology_path=None, pairs=None, seed=0):
    if scenario_path is not None:
        scenario = Scenario.load(scenario_path)
        topology = resolve_topology(topology_path, scenario_path, scenario)
        pairs = ((scenario.caller, scenario.callee),)
    else:
        topology = resolve_topology(topology_path)
        pairs = pairs or PAIRS
    rep = sweep_n(topology, resolve_calibration(calibration_path), pairs, n_range, seed)
    if output_path is not None:
        rep.write(output_path)
    return rep


def cmd_sweep_markspace(marks=MARK_GRID_MS, spaces=(100.0, 150.0), trials=100, output_path=None,
                        calibration_path=None, snr_db=None, seed=MARKSPACE_SEED, jobs=1):
    if snr_db is None:
        snr_db = resolve_calibration(calibration_path).noise_snr_db
    rep = sweep_markspace(marks, spaces, trials, snr_db, seed, jobs)
    if output_path is not None:
        rep.write(output_path)
    return rep


def cmd_attack(strategy, trials, seed=ATTACK_SEED, output_path=None, calibration_path=None, topology_path=None,
               setup: AttackSetup = AttackSetup(), jobs=1):
    strategy = parse_strategy(strategy)
    stats = run_attack(resolve_topology(topology_path), strategy, trials, seed, resolve_calibration(calibration_path),
                       setup, jobs)
    rep = Report("attack", meta={"attacker": setup.attacker, "target": setup.target,
                                 "victim": strategy.victim or setup.victim})
    rep.add(**stats.to_dict())
    if output_path is not None:
        rep.write(output_path)
    return rep


def cmd_fit_calibration(targets_path=None, bounds_path=None, output_path=None, topology_path=None):
    targets = load_targets(targets_path or data_path("targets.json"))
    bounds = load_bounds(bounds_path or data_path("bounds.json"))
    cal, residuals = fit_calibration(resolve_topology(topology_path), targets, bounds)
    rep = Report("fit", meta={"noise_snr_db": cal.noise_snr_db})
    for tg, sim, r in residuals:
        rep.add(target=tg.name, caller=tg.caller, callee=tg.callee,
                variant=tg.variant.value if tg.variant else None, target_ms=tg.total_ms, simulated_ms=sim, residual=r)
    if output_path is not None:
        out = Path(output_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        cal.save(out)
        rep.write(out.with_name(out.stem + "-residuals"))
    return cal, rep
