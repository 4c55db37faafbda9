"""Executable threat scenarios T1..T5 and their threat x countermeasure matrix.

Each scenario builds a fresh simulated system, mounts the attack, and
decides the result from transcript / log evidence only.  Countermeasures
can be switched off individually to check that each one actually carries
the scenarios mapped to it.

* C1 signature authentication -> ``Ccb.auth_enabled``
* C2 pack sealing             -> external reader handles refused
* C3 NFC physical layer       -> range gate on every reader
* C5 data security            -> encrypted + CMAC-tagged sample log
"""

from __future__ import annotations

import csv
import enum
import io
import random
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import ecc
from .auth import sign_uid
from .battery import constant_profile
from .ccb import AuthFailed, InvalidPhase, SystemShutdown
from .channel import Channel, ChannelConfig, FieldModel, PackSealed, TagError, Timeout, TranscriptEntry
from .frames import Command, FrameError, RequestFrame
from .ntag import NtagDevice, provision
from .securelog import HEADER_LEN, RECORD_LEN, LogStore, ScanOutcome
from .system import RunConfig, SimSystem, build_system


class Countermeasure(enum.Enum):
    C1 = "SignatureAuth"
    C2 = "PackSealing"
    C3 = "NfcPhysicalLayer"
    C5 = "DataSecurity"


class Asset(enum.Enum):
    A1 = "SensorData"
    A2 = "SystemIntegrity"
    A3 = "DiagnosticData"


ALL_COUNTERMEASURES = frozenset(Countermeasure)

# commands that only a registered, authenticated module should ever see
MONITORING_COMMANDS = frozenset(
    c.name for c in (Command.I2C_WRITE, Command.I2C_READ, Command.SRAM_CONTENT_READ, Command.SRAM_WRITE, Command.SET_CONFIG)
)


@dataclass(frozen=True)
class ThreatScenario:
    id: str
    name: str
    assets: frozenset[Asset]
    countermeasures: frozenset[Countermeasure]
    expected: str


C = Countermeasure
A = Asset
SCENARIOS = {
    "T1": ThreatScenario("T1", "Battery control obstruction", frozenset({A.A1, A.A3}), frozenset({C.C1}), "Blocked"),
    "T2": ThreatScenario("T2", "Tamper with BMS status messages", frozenset({A.A2, A.A3}), frozenset({C.C1}), "Blocked"),
    "T3": ThreatScenario("T3", "Backdoor access", frozenset({A.A1, A.A2}), frozenset({C.C1, C.C3}), "Blocked"),
    "T4": ThreatScenario("T4", "Remote attack", frozenset({A.A1, A.A2, A.A3}), frozenset({C.C2, C.C3}), "Blocked"),
    "T5": ThreatScenario("T5", "BMS log data compromise", frozenset({A.A1, A.A3}), frozenset({C.C5}), "Detected"),
}


@dataclass
class ScenarioOutcome:
    scenario: ThreatScenario
    result: str
    transcript: list[str] = field(default_factory=list)
    evidence: dict = field(default_factory=dict)

    @property
    def matched_expectation(self) -> bool:
        return self.result == self.scenario.expected


def _system(seed: int, enabled: frozenset[Countermeasure], log_path: Path | None = None) -> SimSystem:
    sys_ = build_system(RunConfig(seed=seed), log_path=log_path)
    sys_.ccb.auth_enabled = C.C1 in enabled
    sys_.channel.config = replace(sys_.channel.config, enforce_range=C.C3 in enabled, sealed=C.C2 in enabled)
    return sys_


def _lines(*channels: Channel) -> list[str]:
    return [f"{ch.name} {e.line()}" for ch in channels for e in ch.transcript]


def _monitoring_frames(channel: Channel, uid: bytes) -> list[TranscriptEntry]:
    return [e for e in channel.transcript if e.kind == "req" and e.uid == uid.hex() and e.command in MONITORING_COMMANDS]


def _swap_in(sys_: SimSystem, tag: NtagDevice) -> None:
    sys_.channel.remove(sys_.tag)
    tag.attach_bus(sys_.module.i2c_bus)
    sys_.channel.place(tag, 2.0)
    sys_.ccb.tag = tag
    sys_.tag = tag


def _drive(sys_: SimSystem, reads: int = 3) -> tuple[str, list]:
    """Run the normal CCB flow against whatever tag is installed."""
    readings: list = []
    try:
        sys_.channel.discover()
        sys_.ccb.run_init_phase()
        readings = sys_.ccb.readout_loop(reads)
        sys_.ccb.run_monitoring_cycle(security=False)
    except AuthFailed as exc:
        return exc.result.outcome.value, readings
    except (SystemShutdown, InvalidPhase, TagError, Timeout, FrameError) as exc:
        return type(exc).__name__, readings
    return "completed", readings


def _probe(channel: Channel, tag: NtagDevice) -> list[str]:
    """Attacker reader tries identification and readout; returns the errors it hit."""
    errors = []
    for req in (
        RequestFrame(Command.READ_SIGNATURE, uid=tag.uid),
        RequestFrame(Command.ENERGY_STATUS),
        RequestFrame(Command.SRAM_CONTENT_READ, block_address=0, block_count=2),
    ):
        try:
            channel.transceive(req, tag)
        except (Timeout, PackSealed, FrameError) as exc:
            errors.append(type(exc).__name__)
    return errors


def _attacker_reader(sys_, enabled, tag, distance_cm: float, external: bool, name: str, seed: int) -> Channel:
    cfg = ChannelConfig(rng_seed=seed, enforce_range=C.C3 in enabled, sealed=C.C2 in enabled, external=external)
    ch = Channel(cfg, FieldModel(), sys_.clock, name=name)
    ch.place(tag, distance_cm)
    return ch


def _counterfeit(sys_: SimSystem, fake: NtagDevice) -> tuple[str, dict, list[str]]:
    _swap_in(sys_, fake)
    flow, readings = _drive(sys_)
    frames = _monitoring_frames(sys_.channel, fake.uid)
    evidence = {
        "flow": flow,
        "monitoring_frames": len(frames),
        "accepted_readings": [r.temp_centiC for r in readings if r.error is None],
        "phase": sys_.ccb.phase.value,
    }
    return ("Blocked" if not frames else "Compromised"), evidence, _lines(sys_.channel)


def _t1(seed, enabled):
    # clone of a registered UID carrying a signature from a non-manufacturer key
    sys_ = _system(seed, enabled)
    attacker_key = random.Random(seed ^ 0x7431).randrange(1, ecc.SECP128R1.n)
    return _counterfeit(sys_, provision(sys_.tag.uid, sign_uid(attacker_key, sys_.tag.uid)))


def _t2(seed, enabled):
    # unsigned module reporting manipulated temperatures
    sys_ = _system(seed, enabled)
    sys_.module.set_profile(constant_profile(3700, -1000))
    sys_.module.advance_to(0.0)
    return _counterfeit(sys_, provision(sys_.tag.uid, bytes(32)))


def _t3(seed, enabled):
    sys_ = _system(seed, enabled)
    genuine = sys_.tag
    rng = random.Random(seed ^ 0x7433)
    attacker_key = rng.randrange(1, ecc.SECP128R1.n)
    uid = b"\xe0" + rng.randbytes(7)
    # (a) unregistered module slipped into the pack
    result, evidence, transcript = _counterfeit(sys_, provision(uid, sign_uid(attacker_key, uid)))
    # (b) hidden reader inside the enclosure, beyond field range of the genuine tag
    probe = _attacker_reader(sys_, enabled, genuine, 7.0, external=False, name="backdoor", seed=rng.getrandbits(64))
    _probe(probe, genuine)
    evidence["probe_responses"] = len(probe.responses())
    blocked = result == "Blocked" and evidence["probe_responses"] == 0
    return ("Blocked" if blocked else "Compromised"), evidence, transcript + _lines(probe)


def _t4(seed, enabled):
    sys_ = _system(seed, enabled)
    rng = random.Random(seed ^ 0x7434)
    # (a) reader outside the enclosure, close enough to couple
    outside = _attacker_reader(sys_, enabled, sys_.tag, 4.0, external=True, name="external", seed=rng.getrandbits(64))
    _probe(outside, sys_.tag)
    # (b) foreign reader beyond field range, e.g. a neighbouring bay
    far = _attacker_reader(sys_, enabled, sys_.tag, 7.0, external=False, name="remote", seed=rng.getrandbits(64))
    _probe(far, sys_.tag)
    # (c) bit errors injected on the genuine link must never yield a reading
    sys_.channel.discover()
    sys_.ccb.run_init_phase()
    sys_.channel.config = replace(sys_.channel.config, corrupt_probability=0.5)
    readings = sys_.ccb.readout_loop(20)
    truth = sys_.module.sensor.temperature_centi_C
    evidence = {
        "external_responses": len(outside.responses()),
        "remote_responses": len(far.responses()),
        "rejected_readings": sum(r.error == "CrcMismatch" for r in readings),
        "accepted_wrong_readings": sum(r.error is None and r.temp_centiC != truth for r in readings),
    }
    blocked = evidence["external_responses"] == 0 and evidence["remote_responses"] == 0 and evidence["accepted_wrong_readings"] == 0
    return ("Blocked" if blocked else "Compromised"), evidence, _lines(outside, far, sys_.channel)


TAMPERED_RECORD = 7


def _leaks(raw: bytes, plaintexts: list[bytes]) -> bool:
    for p in plaintexts:
        for i in range(0, len(p) - 15, 16):
            chunk = p[i : i + 16]
            if len(set(chunk)) > 1 and chunk in raw:
                return True
    return False


def _t5(seed, enabled):
    protected = C.C5 in enabled
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "samples.log"
        sys_ = _system(seed, enabled)
        sys_.hsm.enabled = protected
        sys_.ccb.store = LogStore(path, protected=protected)
        sys_.channel.discover()
        sys_.ccb.run_init_phase()
        sys_.hsm.insert_keys(sys_.keys)
        sys_.ccb.readout_loop(1)
        plaintexts = [sys_.ccb.run_monitoring_cycle(security=True).sample.to_bytes() for _ in range(10)]
        raw = bytearray(path.read_bytes())
        # one byte of ciphertext edited at rest
        raw[HEADER_LEN + TAMPERED_RECORD * RECORD_LEN + 24 + 40] ^= 0x5A
        path.write_bytes(bytes(raw))
        entries = list(LogStore(path).scan(sys_.hsm))
    flagged = [e.index for e in entries if e.outcome in (ScanOutcome.INTEGRITY_FAILURE, ScanOutcome.PADDING_ERROR)]
    evidence = {"flagged_records": flagged, "plaintext_leaked": _leaks(bytes(raw), plaintexts), "records": len(entries)}
    transcript = [f"scan {e.index} seq={e.record.sequence} {e.outcome.value}" for e in entries]
    detected = flagged == [TAMPERED_RECORD] and not evidence["plaintext_leaked"]
    return ("Detected" if detected else "Undetected"), evidence, transcript


_RUNNERS = {"T1": _t1, "T2": _t2, "T3": _t3, "T4": _t4, "T5": _t5}


def run_scenario(tid: str, enabled=ALL_COUNTERMEASURES, seed: int = 0) -> ScenarioOutcome:
    if tid not in SCENARIOS:
        raise KeyError(f"unknown threat id {tid!r}; expected one of {sorted(SCENARIOS)}")
    result, evidence, transcript = _RUNNERS[tid](seed, frozenset(enabled))
    return ScenarioOutcome(SCENARIOS[tid], result, transcript, evidence)


def run_all(enabled=ALL_COUNTERMEASURES, seed: int = 0) -> list[ScenarioOutcome]:
    return [run_scenario(t, enabled, seed) for t in sorted(SCENARIOS)]


MATRIX_HEADER = ("threat", "name", "assets", "countermeasures", "expected", "result", "matched")


def matrix_rows(outcomes: list[ScenarioOutcome]) -> list[tuple]:
    rows = []
    for o in outcomes:
        s = o.scenario
        rows.append((
            s.id,
            s.name,
            " ".join(sorted(a.name for a in s.assets)),
            " ".join(sorted(c.name for c in s.countermeasures)),
            s.expected,
            o.result,
            "yes" if o.matched_expectation else "no",
        ))
    return rows


def matrix_report(outcomes: list[ScenarioOutcome]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MATRIX_HEADER)
    w.writerows(matrix_rows(outcomes))
    return buf.getvalue()


__all__ = [
    "ALL_COUNTERMEASURES",
    "Asset",
    "Countermeasure",
    "SCENARIOS",
    "ScenarioOutcome",
    "ThreatScenario",
    "matrix_report",
    "matrix_rows",
    "run_all",
    "run_scenario",
]

