"""Run configuration, system assembly and the init + N-cycle experiment driver."""

from __future__ import annotations

import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import ecc
from .auth import AllowList, AuthPolicy, load_private_key, load_public_key, sign_uid
from .battery import BatteryModule, SensorState, load_profile
from .ccb import Ccb, CcbPhase
from .channel import Channel, ChannelConfig, FieldModel
from .ntag import NtagConfig, NtagDevice, load_tag, provision
from .securelog import LogStore, SecurityModule, SessionKeys
from .simclock import LatencyTable, PowerTable, SimClock, ledger_csv, report

CONFIG_ENV = "NFCBMS_CONFIG"
MODES = ("secure", "readout")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    iterations: int = 100
    mode: str = "secure"
    security: bool = True
    cached_init: bool = False
    ccbs: int = 1
    distance_cm: float = 2.0
    policy: str = "shutdown"
    addressed: bool = True
    jitter: bool = False
    manufacturer_key: str | None = None
    public_key: str | None = None
    tag_file: str | None = None
    allow_list: list[str] | None = None
    profile: str | None = None
    log_capacity: int | None = None
    latency: dict = field(default_factory=dict)
    power: dict = field(default_factory=dict)
    channel: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.ccbs < 1:
            raise ConfigError("ccbs must be >= 1")
        if self.policy not in ("shutdown", "warn"):
            raise ConfigError("policy must be 'shutdown' or 'warn'")
        try:
            LatencyTable(**self.latency)
            PowerTable(**self.power)
            ChannelConfig(**self.channel)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return asdict(self)


_FIELD_TYPES = {
    "seed": int, "iterations": int, "mode": str, "security": bool, "cached_init": bool,
    "ccbs": int, "distance_cm": (int, float), "policy": str, "addressed": bool, "jitter": bool,
    "manufacturer_key": (str, type(None)), "public_key": (str, type(None)), "tag_file": (str, type(None)),
    "allow_list": (list, type(None)), "profile": (str, type(None)), "log_capacity": (int, type(None)),
    "latency": dict, "power": dict, "channel": dict,
}


def _line_of(text: str, key: str) -> int:
    needle = f'"{key}"'
    for lineno, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return lineno
    return 1


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse a JSON run configuration; errors carry ``source:line``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}:1: top level must be an object")
    known = {f.name for f in fields(RunConfig)}
    for key, value in doc.items():
        where = f"{source}:{_line_of(text, key)}"
        if key not in known:
            raise ConfigError(f"{where}: unknown key {key!r}")
        expected = _FIELD_TYPES[key]
        if isinstance(value, bool) and expected in (int, (int, float)):
            raise ConfigError(f"{where}: {key} must be a number")
        if not isinstance(value, expected):
            raise ConfigError(f"{where}: {key} has wrong type {type(value).__name__}")
    for section, cls in (("latency", LatencyTable), ("power", PowerTable), ("channel", ChannelConfig)):
        allowed = {f.name for f in fields(cls)}
        for key in doc.get(section, {}):
            if key not in allowed:
                raise ConfigError(f"{source}:{_line_of(text, key)}: unknown {section} key {key!r}")
    cfg = RunConfig(**doc)
    try:
        cfg.validate()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    cfg = parse_config(path.read_text(), str(path))
    base = path.parent
    for attr in ("manufacturer_key", "public_key", "tag_file", "profile"):
        value = getattr(cfg, attr)
        if value is not None and not Path(value).is_absolute():
            setattr(cfg, attr, str(base / value))
    return cfg


# -- assembly -----------------------------------------------------------------


@dataclass
class SimSystem:
    ccb: Ccb
    channel: Channel
    tag: NtagDevice
    module: BatteryModule
    hsm: SecurityModule
    keys: SessionKeys
    clock: SimClock
    manufacturer_key: int | None
    public_key: object


def demo_uid(rng: random.Random) -> bytes:
    return b"\xe0" + rng.randbytes(7)


def build_system(cfg: RunConfig, index: int = 0, log_path: str | Path | None = None) -> SimSystem:
    rng = random.Random(cfg.seed * 1_000_003 + index)
    latency = LatencyTable(**cfg.latency)
    power = PowerTable(**cfg.power)
    clock = SimClock(latency, power, jitter_seed=rng.getrandbits(64) if cfg.jitter else None)

    manufacturer = load_private_key(cfg.manufacturer_key) if cfg.manufacturer_key else rng.randrange(1, ecc.SECP128R1.n)
    pub = load_public_key(cfg.public_key) if cfg.public_key else ecc.public_key(manufacturer)

    if cfg.tag_file:
        tag = load_tag(cfg.tag_file)
    else:
        uid = demo_uid(rng)
        tag = provision(uid, sign_uid(manufacturer, uid))
    module = BatteryModule()
    if cfg.profile:
        module.set_profile(load_profile(cfg.profile), allow_faults=True)
    tag.attach_bus(module.i2c_bus)

    cached = None
    if cfg.cached_init:
        # pre-configured devices from an earlier session
        cached = NtagConfig(tag.config.eh_voltage_setpoint_mV, True, True, 0)
        tag.config = cached
        module.sensor.state = SensorState.INITIALIZED

    chan_cfg = ChannelConfig(**{"rng_seed": rng.getrandbits(64), **cfg.channel})
    channel = Channel(chan_cfg, FieldModel(), clock, name=f"ccb{index}")
    channel.place(tag, cfg.distance_cm)

    keys = SessionKeys.generate(rng)
    hsm = SecurityModule(clock, iv_seed=rng.getrandbits(64))
    store = LogStore(log_path, capacity=cfg.log_capacity) if log_path is not None else None
    allow = AllowList(bytes.fromhex(u) for u in cfg.allow_list) if cfg.allow_list is not None else AllowList([tag.uid])
    ccb = Ccb(
        channel, tag, module, allow, pub, AuthPolicy(cfg.policy), hsm=hsm, store=store,
        addressed=cfg.addressed, cached_config=cached,
    )
    return SimSystem(ccb, channel, tag, module, hsm, keys, clock, manufacturer, pub)


# -- experiment driver -----------------------------------------------------------


def run_one(cfg: RunConfig, index: int = 0, out_dir: Path | None = None) -> tuple[dict, SimSystem]:
    log_path = None
    if out_dir is not None and cfg.mode == "secure" and cfg.security:
        log_path = out_dir / (f"samples_ccb{index}.log" if cfg.ccbs > 1 else "samples.log")
        if log_path.exists():
            log_path.unlink()
    sys_ = build_system(cfg, index, log_path)
    ccb, clock = sys_.ccb, sys_.clock
    summary: dict = {"ccb": index, "module_uid": sys_.tag.uid.hex(), "mode": cfg.mode}

    uids = sys_.channel.discover()
    summary["discovered"] = [u.hex() for u in uids]
    if sys_.tag.uid not in uids:
        summary["outcome"] = "tag_not_discovered"
        return summary, sys_
    try:
        init = ccb.run_init_phase(cached=cfg.cached_init)
    except Exception as exc:  # reported, not fatal to the run
        summary["outcome"] = f"init_failed:{type(exc).__name__}"
        summary["phase"] = ccb.phase.value
        return summary, sys_
    summary["init"] = {"total_ms": init.total_ms, "steps": dict(init.steps), "cached": init.cached}

    if cfg.mode == "readout":
        t0 = clock.now_ns
        readings = ccb.readout_loop(cfg.iterations)
        total_ms = (clock.now_ns - t0) / 1e6
        ok = [r for r in readings if r.error is None]
        summary["readout"] = {
            "iterations": cfg.iterations,
            "total_ms": total_ms,
            "total_s": total_ms / 1000,
            "successful": len(ok),
            "failed": len(readings) - len(ok),
            "payload_bytes": sum(len(r.payload) for r in ok),
            "rate_per_s": (1000.0 * cfg.iterations / total_ms) if total_ms else 0.0,
        }
    else:
        if cfg.security:
            ccb.hsm.insert_keys(sys_.keys)
        prime = ccb.readout_loop(1) if cfg.iterations else []
        t0 = clock.now_ns
        cycles = [ccb.run_monitoring_cycle(security=cfg.security) for _ in range(cfg.iterations)]
        total_ms = (clock.now_ns - t0) / 1e6
        summary["key_insertion_ms"] = clock.latency.key_insertion if cfg.security else 0.0
        summary["priming_read_ok"] = bool(prime and prime[0].error is None)
        summary["cycles"] = {
            "count": len(cycles),
            "total_ms": total_ms,
            "total_s": total_ms / 1000,
            "mean_ms": total_ms / len(cycles) if cycles else 0.0,
            "records": sum(1 for c in cycles if c.record is not None),
        }
    summary["outcome"] = "ok" if ccb.phase is not CcbPhase.SHUTDOWN else "shutdown"
    summary["phase"] = ccb.phase.value
    rep = report(clock.ledger, clock.latency, clock.power)
    summary["ledger"] = {
        "total_duration_ms": rep["total_duration_ms"],
        "total_energy_mJ": rep["total_energy_mJ"],
        "components": rep["components"],
        "security_time_overhead_pct": rep["security_time_overhead_pct"],
        "security_energy_share_pct": rep["security_energy_share_pct"],
    }
    return summary, sys_


def _round_floats(obj, ndigits: int = 6):
    if isinstance(obj, float):
        return round(obj, ndigits)
    if isinstance(obj, dict):
        return {k: _round_floats(v, ndigits) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round_floats(v, ndigits) for v in obj]
    return obj


def simulate(cfg: RunConfig, out_dir: str | Path | None = None) -> dict:
    """Run every configured CCB, write ledger/summary/transcript/log files, return the summary."""
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=min(cfg.ccbs, 8)) as pool:
        results = list(pool.map(lambda i: run_one(cfg, i, out), range(cfg.ccbs)))
    results.sort(key=lambda r: r[0]["ccb"])
    summary = {"config": cfg.to_dict(), "ccbs": [_round_floats(s) for s, _ in results]}
    if out is not None:
        multi = cfg.ccbs > 1
        parts = [ledger_csv(sys_.clock.ledger, prefix=f"ccb{i}/" if multi else "") for i, (_, sys_) in enumerate(results)]
        # one header for the merged file
        csv_text = parts[0] + "".join(p.split("\n", 1)[1] for p in parts[1:])
        (out / "ledger.csv").write_text(csv_text)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        (out / "transcript.txt").write_text(
            "".join(
                "".join(f"ccb{i} {e.line()}\n" for e in sys_.channel.transcript) for i, (_, sys_) in enumerate(results)
            )
        )
        if cfg.mode == "secure" and cfg.security:
            keys = {f"ccb{i}": sys_.keys.to_json() for i, (_, sys_) in enumerate(results)}
            (out / "session_keys.json").write_text(json.dumps(keys, indent=2, sort_keys=True) + "\n")
    return summary
