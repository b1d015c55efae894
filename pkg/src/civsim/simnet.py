"""Scenario execution: topologies, honest runs, adversary campaigns and run metrics."""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .calibration import ConfigError, LatencyCalibration, data_path, load_json
from .civ import (
    UNVERIFIED_WARNING,
    Breakdown,
    CivAgent,
    CivConfig,
    PbxAgent,
    Variant,
    VerificationSession,
)
from .core import (
    DEFAULT_CHALLENGE_DIGITS,
    PROFILES,
    CallerLine,
    CivError,
    PhoneNumber,
    VerificationStatus,
)
from .dtmf import CLEAN, NoiseModel
from .engine import Simulator
from .signaling import (
    CallSession,
    CdrRecord,
    CnamDatabase,
    CnamRecord,
    Endpoint,
    Handler,
    Network,
)

TOPOLOGY_SCHEMA = "civsim.topology/1"
SCENARIO_SCHEMA = "civsim.scenario/1"
ROLES = ("civ", "plain", "adversary", "pbx")
ATTACK_CHUNK = 5000


class NotApplicable(CivError):
    pass


# topology


@dataclass(frozen=True)
class EndpointSpec:
    id: str
    number: str
    profile: str
    name: str = ""
    role: str = "civ"
    forward_to: str | None = None
    owned: tuple = ()
    cnam_lookup: bool = False
    pbx: str | None = None


@dataclass(frozen=True)
class Topology:
    endpoints: tuple
    links: tuple = ()
    cnam: tuple = ()

    def __post_init__(self):
        ids = set()
        for ep in self.endpoints:
            if ep.id in ids:
                raise ConfigError(f"duplicate endpoint id {ep.id!r}", "topology.endpoints")
            ids.add(ep.id)
        for ep in self.endpoints:
            where = f"topology.endpoints[{ep.id}]"
            if ep.profile not in PROFILES:
                raise ConfigError(f"unknown profile {ep.profile!r}", where + ".profile")
            if ep.role not in ROLES:
                raise ConfigError(f"unknown role {ep.role!r}", where + ".role")
            if ep.forward_to is not None:
                if ep.forward_to not in ids:
                    raise ConfigError(f"unknown forward target {ep.forward_to!r}", where + ".forward_to")
                if self.spec(ep.forward_to).role == "adversary" and ep.role != "adversary":
                    raise ConfigError("cannot forward to an adversary endpoint", where + ".forward_to")
            if ep.pbx is not None and (ep.pbx not in ids or self.spec(ep.pbx).role != "pbx"):
                raise ConfigError(f"{ep.pbx!r} is not a pbx endpoint", where + ".pbx")
        for a, b in self.links:
            for x in (a, b):
                if x not in ids:
                    raise ConfigError(f"unknown endpoint {x!r}", "topology.links")

    def spec(self, endpoint_id: str) -> EndpointSpec:
        for ep in self.endpoints:
            if ep.id == endpoint_id:
                return ep
        raise ConfigError(f"unknown endpoint {endpoint_id!r}", "topology")

    def ids(self, role: str | None = None) -> list[str]:
        return [ep.id for ep in self.endpoints if role is None or ep.role == role]

    @classmethod
    def from_dict(cls, doc: dict, where: str = "topology") -> Topology:
        if not isinstance(doc, dict) or doc.get("schema") != TOPOLOGY_SCHEMA:
            raise ConfigError(f"expected schema {TOPOLOGY_SCHEMA!r}", f"{where}.schema")
        eps = []
        for i, raw in enumerate(doc.get("endpoints", [])):
            w = f"{where}.endpoints[{i}]"
            try:
                eps.append(EndpointSpec(
                    id=raw["id"], number=str(raw["number"]), profile=raw["profile"], name=raw.get("name", ""),
                    role=raw.get("role", "civ"), forward_to=raw.get("forward_to"),
                    owned=tuple(str(n) for n in raw.get("owned", ())),
                    cnam_lookup=bool(raw.get("cnam_lookup", False)), pbx=raw.get("pbx"),
                ))
            except KeyError as exc:
                raise ConfigError(f"missing field {exc.args[0]!r}", w) from None
            except TypeError:
                raise ConfigError("endpoint must be an object", w) from None
        links = tuple(tuple(link) for link in doc.get("links", []))
        cnam = tuple((str(r["number"]), r.get("name", ""), bool(r.get("civ_flag", False)))
                     for r in doc.get("cnam", []))
        return cls(tuple(eps), links, cnam)

    @classmethod
    def load(cls, path) -> Topology:
        return cls.from_dict(load_json(path), str(path))

    def to_dict(self) -> dict:
        return {
            "schema": TOPOLOGY_SCHEMA,
            "endpoints": [_spec_dict(ep) for ep in self.endpoints],
            "links": [list(link) for link in self.links],
            "cnam": [{"number": n, "name": name, "civ_flag": flag} for n, name, flag in self.cnam],
        }


def _spec_dict(ep: EndpointSpec) -> dict:
    d = {"id": ep.id, "number": ep.number, "profile": ep.profile}
    if ep.name:
        d["name"] = ep.name
    if ep.role != "civ":
        d["role"] = ep.role
    if ep.forward_to:
        d["forward_to"] = ep.forward_to
    if ep.owned:
        d["owned"] = list(ep.owned)
    if ep.cnam_lookup:
        d["cnam_lookup"] = True
    if ep.pbx:
        d["pbx"] = ep.pbx
    return d


def default_topology() -> Topology:
    return Topology.load(data_path("topology.json"))


@dataclass
class World:
    """A built network plus the agents running on it."""

    sim: Simulator
    net: Network
    topology: Topology
    agents: dict = field(default_factory=dict)
    pbxs: dict = field(default_factory=dict)

    def ep(self, endpoint_id: str) -> Endpoint:
        try:
            return self.net.endpoints[endpoint_id]
        except KeyError:
            raise ConfigError(f"unknown endpoint {endpoint_id!r}", "scenario") from None


def build_world(topology: Topology, calibration: LatencyCalibration, seed: int = 0, trace: bool = True,
                config: CivConfig = CivConfig(), noise: NoiseModel = CLEAN) -> World:
    sim = Simulator(seed, trace=trace)
    cnam = CnamDatabase(CnamRecord(PhoneNumber(n), name, flag) for n, name, flag in topology.cnam)
    net = Network(sim, calibration, cnam, analogue_noise=noise)
    world = World(sim, net, topology)
    for spec in topology.endpoints:
        ep = Endpoint(spec.id, PhoneNumber(spec.number), PROFILES[spec.profile], name=spec.name,
                      owned=frozenset(spec.owned), forward_to=spec.forward_to,
                      adversary=spec.role == "adversary", cnam_lookup=spec.cnam_lookup)
        net.add_endpoint(ep)
        if spec.role == "civ":
            world.agents[spec.id] = CivAgent(net, ep, config)
        elif spec.role == "pbx":
            world.pbxs[spec.id] = PbxAgent(net, ep, spec.name)
    for spec in topology.endpoints:
        if spec.pbx is not None and spec.id in world.agents:
            world.pbxs[spec.pbx].add_extension(world.agents[spec.id])
    for a, b in topology.links:
        net.link(a, b)
    return world


# scenarios


@dataclass(frozen=True)
class Scenario:
    caller: str
    callee: str
    adversary: dict | None = None
    variant: Variant | None = None
    n: int = DEFAULT_CHALLENGE_DIGITS
    repeat: int = 1
    seed: int = 0
    present_as: str | None = None
    line_noise: str = "clean"
    topology: str | None = None

    @classmethod
    def from_dict(cls, doc: dict, where: str = "scenario") -> Scenario:
        if not isinstance(doc, dict) or doc.get("schema") != SCENARIO_SCHEMA:
            raise ConfigError(f"expected schema {SCENARIO_SCHEMA!r}", f"{where}.schema")
        known = {"schema", "caller", "callee", "adversary", "variant", "n", "repeat", "seed", "present_as",
                 "line_noise", "topology"}
        for key in doc:
            if key not in known:
                raise ConfigError(f"unknown field {key!r}", f"{where}.{key}")
        for key in ("caller", "callee"):
            if not isinstance(doc.get(key), str):
                raise ConfigError("required endpoint id missing", f"{where}.{key}")
        variant = doc.get("variant")
        if variant is not None:
            try:
                variant = Variant(variant)
            except ValueError:
                raise ConfigError(f"unknown variant {variant!r}", f"{where}.variant") from None
        for key, lo in (("n", 1), ("repeat", 1)):
            v = doc.get(key, cls.__dataclass_fields__[key].default)
            if not isinstance(v, int) or isinstance(v, bool) or v < lo or (key == "n" and v > 15):
                raise ConfigError(f"invalid value {v!r}", f"{where}.{key}")
        if doc.get("line_noise", "clean") not in ("clean", "calibrated"):
            raise ConfigError("must be 'clean' or 'calibrated'", f"{where}.line_noise")
        adversary = doc.get("adversary")
        if adversary is not None:
            parse_strategy(adversary, f"{where}.adversary")
        return cls(doc["caller"], doc["callee"], adversary, variant, doc.get("n", DEFAULT_CHALLENGE_DIGITS),
                   doc.get("repeat", 1), int(doc.get("seed", 0)), doc.get("present_as"),
                   doc.get("line_noise", "clean"), doc.get("topology"))

    @classmethod
    def load(cls, path) -> Scenario:
        return cls.from_dict(load_json(path), str(path))

    def check(self, topology: Topology):
        ids = set(topology.ids())
        for key in ("caller", "callee", "present_as"):
            value = getattr(self, key)
            if value is not None and value not in ids:
                raise ConfigError(f"unknown endpoint {value!r}", f"scenario.{key}")


@dataclass
class RunMetrics:
    seed: int
    caller: str
    callee: str
    outcome: str
    variant: str | None = None
    warning: str | None = None
    rang: bool = False
    total_ms: float = 0.0
    breakdown: Breakdown | None = None
    call_setups: int = 0
    charges: dict = field(default_factory=dict)
    cdrs: list = field(default_factory=list)
    verification: VerificationSession | None = None
    transfers: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "caller": self.caller,
            "callee": self.callee,
            "outcome": self.outcome,
            "variant": self.variant,
            "warning": self.warning,
            "rang": self.rang,
            "total_ms": self.total_ms,
            "breakdown": None if self.breakdown is None else self.breakdown.as_dict(),
            "call_setups": self.call_setups,
            "charges": dict(sorted(self.charges.items())),
            "cdrs": [c.to_dict() for c in self.cdrs],
        }


def latency_breakdown(metrics: RunMetrics) -> Breakdown:
    if metrics.outcome == VerificationStatus.NOT_ATTEMPTED.value or metrics.verification is None:
        raise NotApplicable("no verification ran")
    return metrics.verification.breakdown


def _noise_for(scenario: Scenario, calibration: LatencyCalibration) -> NoiseModel:
    if scenario.line_noise == "calibrated" and not math.isinf(calibration.noise_snr_db):
        return NoiseModel.gaussian(calibration.noise_snr_db)
    return CLEAN


def run_scenario(topology: Topology, scenario: Scenario, calibration: LatencyCalibration, seed: int | None = None,
                 timeout_ms: float | None = None, drop: frozenset = frozenset(), trace: bool = True):
    """One run. Returns (RunMetrics, trace) where trace is a list of (time_us, endpoint, event, payload)."""
    scenario.check(topology)
    seed = scenario.seed if seed is None else seed
    config = CivConfig(n=scenario.n, variant=scenario.variant)
    if timeout_ms is not None:
        config = CivConfig(n=scenario.n, variant=scenario.variant, timeout_ms=timeout_ms)
    world = build_world(topology, calibration, seed, trace, config, _noise_for(scenario, calibration))
    world.net.drop_purposes = set(drop)
    caller = world.ep(scenario.caller)
    target_number = world.ep(scenario.callee).number
    _, target = world.net.resolve(target_number)

    if scenario.adversary is not None:
        strategy = parse_strategy(scenario.adversary)
        victim = world.ep(strategy.victim or scenario.present_as or scenario.callee)
        Adversary(world.net, caller, strategy).attack(target_number, victim.line)
    else:
        agent = world.agents.get(caller.id)
        if agent is None:
            raise ConfigError(f"caller {caller.id!r} does not run CIV", "scenario.caller")
        presented = None if scenario.present_as is None else world.ep(scenario.present_as).line
        spec = topology.spec(caller.id)
        if spec.pbx is not None:
            world.pbxs[spec.pbx].call_from(agent, target_number)
        else:
            agent.call(target_number, presented)
    world.sim.run()
    return collect_metrics(world, caller, target, seed), world.sim.trace


def collect_metrics(world: World, caller: Endpoint, target: Endpoint, seed: int) -> RunMetrics:
    net = world.net
    rings = [r for r in net.rings if r.endpoint == target.id]
    agent = world.agents.get(target.id)
    vs = agent.sessions[0] if agent is not None and agent.sessions else None
    m = RunMetrics(seed, caller.id, target.id, VerificationStatus.NOT_ATTEMPTED.value)
    if rings:
        m.rang = True
        m.outcome = rings[0].status
        m.warning = rings[0].warning
    if vs is not None and vs.outcome is not None:
        m.variant = vs.variant.value
        m.total_ms = vs.total_us / 1000.0
        m.breakdown = vs.breakdown
        m.verification = vs
    m.call_setups = net.call_setups
    m.charges = {ep.id: ep.charges for ep in net.endpoints.values() if ep.charges}
    m.cdrs = list(net.cdrs)
    m.transfers = list(net.transfers)
    return m


# adversaries


@dataclass(frozen=True)
class SpoofAndGuess:
    n_guess_digits: int = DEFAULT_CHALLENGE_DIGITS
    victim: str | None = None
    name: str = "spoof-and-guess"


@dataclass(frozen=True)
class Downgrade:
    victim: str | None = None
    name: str = "downgrade"


@dataclass(frozen=True)
class ReflectedDos:
    victim: str | None = None
    rate_per_min: float = 6.0
    calls: int = 100
    reflectors: tuple = ()
    name: str = "reflected-dos"


def parse_strategy(doc, where: str = "strategy"):
    if isinstance(doc, (SpoofAndGuess, Downgrade, ReflectedDos)):
        return doc
    if isinstance(doc, str):
        doc = {"strategy": doc}
    if not isinstance(doc, dict):
        raise ConfigError("strategy must be an object", where)
    kind = doc.get("strategy")
    args = {k: v for k, v in doc.items() if k != "strategy"}
    cls = {"spoof-and-guess": SpoofAndGuess, "downgrade": Downgrade, "reflected-dos": ReflectedDos}.get(kind)
    if cls is None:
        raise ConfigError(f"unknown strategy {kind!r}", f"{where}.strategy")
    if "reflectors" in args:
        args["reflectors"] = tuple(args["reflectors"])
    try:
        return cls(**args)
    except TypeError as exc:
        raise ConfigError(str(exc), where) from None


class Adversary(Handler):
    """Attacker endpoint. It can present any caller line but only hears calls to numbers it owns."""

    def __init__(self, network: Network, endpoint: Endpoint, strategy):
        self.net = network
        self.ep = endpoint
        self.strategy = strategy
        endpoint.handler = self
        self.guesses: list[str] = []
        self._spoofed: dict = {}
        self._lines: dict = {}

    def _guess(self) -> str:
        g = "".join(self.net.sim.rng.choices("0123456789", k=self.strategy.n_guess_digits))
        self.guesses.append(g)
        return g

    def attack(self, target: PhoneNumber, victim: CallerLine) -> CallSession:
        line = self._lines.get(victim)
        if line is None:
            line = victim.without_flag() if isinstance(self.strategy, Downgrade) else victim.with_flag()
            self._lines[victim] = line
        s = self.net.place_call(self.ep, target, line, tag=("attack",))
        if isinstance(self.strategy, Downgrade):
            return s
        self._spoofed[s] = (target, victim)
        return s

    def resumed(self, s: CallSession):
        if isinstance(self.strategy, SpoofAndGuess) and s in self._spoofed and s.caller is self.ep:
            self.net.send_dtmf(s, self.ep, self._guess(), tag=("guess",))

    def answered(self, s: CallSession):
        tag = s.tag
        if isinstance(self.strategy, SpoofAndGuess) and tag and tag[0] == "attack-response":
            self.net.send_dtmf(s, self.ep, self._guess(), tag=("guess",))

    def ended(self, s: CallSession, by):
        # the callee dropped the spoofed call to verify out of band: call back as if we were the victim
        spoofed = self._spoofed.pop(s, None)
        if isinstance(self.strategy, SpoofAndGuess) and spoofed is not None and by is s.callee:
            target, victim = spoofed
            self.net.sim.schedule(0.0, self._call_back, target, victim)

    def _call_back(self, target, victim):
        try:
            self.net.place_call(self.ep, target, victim.with_flag(), tag=("attack-response",))
        except CivError:
            pass

    def reset(self):
        self.guesses.clear()
        self._spoofed.clear()


# attack campaigns


@dataclass
class AttackStats:
    strategy: str
    trials: int
    seed: int
    verified: int = 0
    not_verified: int = 0
    not_attempted: int = 0
    rang: int = 0
    warnings: int = 0
    n_digits: int = DEFAULT_CHALLENGE_DIGITS
    victim_missed_calls: int = 0
    victim_filtered: int = 0
    reflected_calls: int = 0
    cdr_pairs: int = 0
    cdr_unmatched: int = 0
    cdr_attributed_to_attacker: int = 0
    wall_violations: int = 0

    @property
    def rate(self) -> float:
        return self.verified / self.trials if self.trials else 0.0

    @property
    def expected_rate(self) -> float:
        return 10.0 ** -self.n_digits

    def interval(self, level: float = 0.997) -> tuple[float, float]:
        """Clopper-Pearson interval for the success rate."""
        from scipy.stats import beta

        a = (1.0 - level) / 2.0
        k, n = self.verified, self.trials
        lo = 0.0 if k == 0 else float(beta.ppf(a, k, n - k + 1))
        hi = 1.0 if k == n else float(beta.ppf(1.0 - a, k + 1, n - k))
        return lo, hi

    @property
    def z_score(self) -> float:
        p = self.expected_rate
        sd = math.sqrt(self.trials * p * (1.0 - p))
        return (self.verified - self.trials * p) / sd if sd else 0.0

    def merge(self, other: AttackStats):
        for name in ("verified", "not_verified", "not_attempted", "rang", "warnings", "victim_missed_calls",
                     "victim_filtered", "reflected_calls", "cdr_pairs", "cdr_unmatched",
                     "cdr_attributed_to_attacker", "wall_violations"):
            setattr(self, name, getattr(self, name) + getattr(other, name))

    def to_dict(self) -> dict:
        lo, hi = self.interval()
        return {
            "strategy": self.strategy,
            "trials": self.trials,
            "seed": self.seed,
            "n_digits": self.n_digits,
            "verified": self.verified,
            "not_verified": self.not_verified,
            "not_attempted": self.not_attempted,
            "rang": self.rang,
            "warnings": self.warnings,
            "rate": self.rate,
            "expected_rate": self.expected_rate,
            "ci_low": lo,
            "ci_high": hi,
            "z_score": self.z_score,
            "victim_missed_calls": self.victim_missed_calls,
            "victim_filtered": self.victim_filtered,
            "reflected_calls": self.reflected_calls,
            "cdr_pairs": self.cdr_pairs,
            "cdr_unmatched": self.cdr_unmatched,
            "cdr_attributed_to_attacker": self.cdr_attributed_to_attacker,
            "wall_violations": self.wall_violations,
        }


@dataclass(frozen=True)
class AttackSetup:
    attacker: str = "eve"
    victim: str = "sip-a"
    target: str = "sip-b"


def chunk_seed(seed: int, chunk: int) -> int:
    # independent of how chunks are spread over workers
    return random.Random(f"civsim-attack:{seed}:{chunk}").getrandbits(63)


def _count_ring(stats: AttackStats, ring):
    stats.rang += 1
    if ring.warning:
        stats.warnings += 1
    if ring.status == VerificationStatus.VERIFIED.value:
        stats.verified += 1
    elif ring.status == VerificationStatus.NOT_VERIFIED.value:
        stats.not_verified += 1
    else:
        stats.not_attempted += 1


def _attack_chunk(args) -> AttackStats:
    topology, calibration, strategy, setup, trials, seed, chunk = args
    # an n-digit guessing campaign runs against an n-digit deployment
    n = getattr(strategy, "n_guess_digits", DEFAULT_CHALLENGE_DIGITS)
    world = build_world(topology, calibration, chunk_seed(seed, chunk), trace=False, config=CivConfig(n=n))
    net = world.net
    eve = world.ep(setup.attacker)
    if not eve.adversary:
        raise ConfigError(f"{setup.attacker!r} is not an adversary endpoint", "attack.attacker")
    target_number = world.ep(setup.target).number
    _, target = net.resolve(target_number)
    victim_line = world.ep(strategy.victim or setup.victim).line
    adversary = Adversary(net, eve, strategy)
    _, victim_device = net.resolve(world.ep(strategy.victim or setup.victim).number)
    # only the target and the victim's device ever see traffic in these strategies
    touched = [world.agents[i] for i in dict.fromkeys((target.id, victim_device.id)) if i in world.agents]
    stats = AttackStats(strategy.name, trials, seed, n_digits=n)
    for _ in range(trials):
        adversary.attack(target_number, victim_line)
        world.sim.run()
        rings = net.rings
        if len(rings) != 1 or rings[0].endpoint != target.id:
            raise AssertionError(f"expected exactly one ring at {target.id} per trial, got {rings}")
        _count_ring(stats, rings[0])
        net.rings.clear()
        net.cdrs.clear()
        net.transfers.clear()
        net.teardown()
        adversary.reset()
        for a in touched:
            a.reset()
    return stats


def _chunks(trials: int, size: int):
    out, start = [], 0
    while start < trials:
        out.append(min(size, trials - start))
        start += size
    return out


def run_attack(topology: Topology, strategy, trials: int, seed: int = 0,
               calibration: LatencyCalibration | None = None, setup: AttackSetup = AttackSetup(),
               jobs: int = 1) -> AttackStats:
    if trials < 1:
        raise ConfigError("trials must be >= 1", "attack.trials")
    strategy = parse_strategy(strategy)
    if calibration is None:
        from .calibration import default_calibration

        calibration = default_calibration()
    if isinstance(strategy, ReflectedDos):
        return run_reflected_dos(topology, strategy, seed, calibration, setup)
    work = [(topology, calibration, strategy, setup, size, seed, i)
            for i, size in enumerate(_chunks(trials, ATTACK_CHUNK))]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_attack_chunk, work))
    else:
        parts = [_attack_chunk(w) for w in work]
    n = getattr(strategy, "n_guess_digits", DEFAULT_CHALLENGE_DIGITS)
    total = AttackStats(strategy.name, trials, seed, n_digits=n)
    for part in parts:
        total.merge(part)
    return total


@dataclass(frozen=True)
class ReflectionPair:
    spoofed: CdrRecord
    verification: CdrRecord


def correlate_reflections(cdrs, victim_number: str):
    """Pair each call that reached the victim with the spoofed call that provoked it.

    A reflector's call to the victim is traced to the most recent earlier call
    into that reflector presenting the victim's number.
    """
    by_callee: dict[str, list] = {}
    for c in cdrs:
        if c.presented_cli == victim_number:
            by_callee.setdefault(c.callee_number, []).append(c)
    pairs, unmatched, used = [], [], set()
    for c in cdrs:
        if c.callee_number != victim_number or c.presented_cli == victim_number:
            continue
        candidates = [s for s in by_callee.get(c.origin_number, ())
                      if s.start_us <= c.start_us and s.session_id not in used]
        if candidates:
            spoofed = max(candidates, key=lambda s: (s.start_us, s.session_id))
            used.add(spoofed.session_id)
            pairs.append(ReflectionPair(spoofed, c))
        else:
            unmatched.append(c)
    return pairs, unmatched


def run_reflected_dos(topology: Topology, strategy: ReflectedDos, seed: int, calibration: LatencyCalibration,
                      setup: AttackSetup = AttackSetup(), trace: bool = False):
    world = build_world(topology, calibration, seed, trace=trace)
    net = world.net
    eve = world.ep(setup.attacker)
    victim = world.ep(strategy.victim or setup.victim)
    reflectors = list(strategy.reflectors) or [
        i for i in topology.ids("civ")
        if i != victim.id and topology.spec(i).pbx is None and topology.spec(i).profile == "sip"
    ]
    if not reflectors:
        raise ConfigError("no reflectors available", "attack.reflectors")
    adversary = Adversary(net, eve, strategy)
    interval = 60_000.0 / strategy.rate_per_min
    for i in range(strategy.calls):
        refl = world.ep(reflectors[i % len(reflectors)])
        net.sim.schedule(i * interval, adversary.attack, refl.number, victim.line)
    net.sim.run()
    stats = AttackStats(strategy.name, strategy.calls, seed)
    victim_agent = world.agents.get(victim.id)
    stats.victim_missed_calls = len(victim.missed_calls)
    stats.victim_filtered = len(victim_agent.filtered) if victim_agent else 0
    reflector_ids = {world.ep(r).id for r in reflectors}
    for ring in net.rings:
        if ring.endpoint in reflector_ids:
            _count_ring(stats, ring)
    pairs, unmatched = correlate_reflections(net.cdrs, victim.number.digits)
    stats.reflected_calls = len(pairs) + len(unmatched)
    stats.cdr_pairs = len(pairs)
    stats.cdr_unmatched = len(unmatched)
    stats.cdr_attributed_to_attacker = sum(p.spoofed.origin == eve.id for p in pairs)
    if trace:
        return stats, net.sim.trace
    return stats


def load_topology(path=None) -> Topology:
    return default_topology() if path is None else Topology.load(Path(path))
