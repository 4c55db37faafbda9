"""Cell-control-board logic: configuration, module validation, sensor readout,
diagnostics and the protected sample pipeline.

Monitoring sample v1 (162 bytes, little-endian)::

    header            20  module_uid(8) session_id(u32) timestamp_ms(u32) sequence(u32)
    measurements      60  15 x {sensor_id(u8) raw_value(u16 | i16 for temp) status(u8)}
    cell_diagnostics  42  14 x {fault_flags(u8) soc_pct(u8) balance_duty(u8)}
    pack_diagnostics  40  pack_voltage_mV(u32) pack_current_mA(i32) pack_soc_pct(u16)
                          pack_soh_pct(u16) min_cell_mV(u16) max_cell_mV(u16) avg_cell_mV(u16)
                          min_temp_centiC(i16) max_temp_centiC(i16) fault_bitmap(u32)
                          uptime_s(u32) bcc_status(u16) reserved(8)

Sensor ids 1..14 are cell voltages (mV), id 15 the temperature (centi-degC).
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field, replace

from .auth import ActionTaken, AllowList, AuthPolicy, AuthResult, authenticate_tag
from .battery import CMD_INIT, CMD_MEASURE, N_CELLS, REG_CONTROL, SENSOR_ADDRESS, BatteryModule, decode_temperature
from .channel import Channel, NotPowered, TagError, Timeout
from .frames import BLOCK_SIZE, Command, ErrorCode, FrameError, RequestFrame
from .ntag import NtagConfig, NtagDevice
from .securelog import EncryptedRecord, LogStore, NoSessionKey, SecurityModule, pad
from .simclock import NS_PER_MS, SimClock

SAMPLE_LEN = 162

OV_MV = 4300
UV_MV = 2800
OT_CENTI_C = 6000
SOC_EMPTY_MV = 3000
SOC_FULL_MV = 4200
SOH_PLACEHOLDER_PCT = 100

FLAG_OV = 0x01
FLAG_UV = 0x02
FLAG_OT = 0x04
FAULT_BITMAP_OT = 1 << 16

STATUS_OK = 0x00
STATUS_MISSING = 0x01
STATUS_FAULT = 0x02

BCC_ACTIVE = 0x0001
BCC_FAULT = 0x0002
BCC_TEMP_MISSING = 0x0004

TEMP_SENSOR_ID = 15
SENSOR_READ_BLOCKS = 2

_HEADER = struct.Struct("<8sIII")
_CELL_MEAS = struct.Struct("<BHB")
_TEMP_MEAS = struct.Struct("<BhB")
_CELL_DIAG = struct.Struct("<BBB")
_PACK = struct.Struct("<IiHHHHHhhIIH8s")
assert _HEADER.size + 14 * _CELL_MEAS.size + _TEMP_MEAS.size + 14 * _CELL_DIAG.size + _PACK.size == SAMPLE_LEN


def round_half_up_div(num: int, den: int) -> int:
    """``num / den`` rounded to the nearest integer, halves upward."""
    return (2 * num + den) // (2 * den)


@dataclass(frozen=True)
class Measurement:
    sensor_id: int
    raw_value: int
    status: int = STATUS_OK


@dataclass(frozen=True)
class CellDiagnostics:
    fault_flags: int
    soc_pct: int
    balance_duty: int = 0


@dataclass(frozen=True)
class PackDiagnostics:
    pack_voltage_mV: int
    pack_current_mA: int
    pack_soc_pct: int
    pack_soh_pct: int
    min_cell_mV: int
    max_cell_mV: int
    avg_cell_mV: int
    min_temp_centiC: int
    max_temp_centiC: int
    fault_bitmap: int
    uptime_s: int = 0
    bcc_status: int = 0
    reserved: bytes = bytes(8)


@dataclass(frozen=True)
class MonitoringSample:
    module_uid: bytes
    session_id: int
    timestamp_ms: int
    sequence: int
    measurements: tuple[Measurement, ...]
    cell_diagnostics: tuple[CellDiagnostics, ...]
    pack: PackDiagnostics

    def to_bytes(self) -> bytes:
        out = bytearray(_HEADER.pack(self.module_uid, self.session_id, self.timestamp_ms, self.sequence))
        for m in self.measurements[:N_CELLS]:
            out += _CELL_MEAS.pack(m.sensor_id, m.raw_value, m.status)
        t = self.measurements[N_CELLS]
        out += _TEMP_MEAS.pack(t.sensor_id, t.raw_value, t.status)
        for d in self.cell_diagnostics:
            out += _CELL_DIAG.pack(d.fault_flags, d.soc_pct, d.balance_duty)
        p = self.pack
        out += _PACK.pack(
            p.pack_voltage_mV, p.pack_current_mA, p.pack_soc_pct, p.pack_soh_pct,
            p.min_cell_mV, p.max_cell_mV, p.avg_cell_mV, p.min_temp_centiC, p.max_temp_centiC,
            p.fault_bitmap, p.uptime_s, p.bcc_status, p.reserved,
        )
        if len(out) != SAMPLE_LEN:
            raise AssertionError(f"sample serialised to {len(out)} bytes")
        return bytes(out)

    @classmethod
    def from_bytes(cls, raw: bytes) -> MonitoringSample:
        if len(raw) != SAMPLE_LEN:
            raise ValueError(f"sample must be {SAMPLE_LEN} bytes, got {len(raw)}")
        uid, sid, ts, seq = _HEADER.unpack_from(raw, 0)
        off = _HEADER.size
        meas = []
        for _ in range(N_CELLS):
            meas.append(Measurement(*_CELL_MEAS.unpack_from(raw, off)))
            off += _CELL_MEAS.size
        meas.append(Measurement(*_TEMP_MEAS.unpack_from(raw, off)))
        off += _TEMP_MEAS.size
        diags = []
        for _ in range(N_CELLS):
            diags.append(CellDiagnostics(*_CELL_DIAG.unpack_from(raw, off)))
            off += _CELL_DIAG.size
        pack = PackDiagnostics(*_PACK.unpack_from(raw, off))
        return cls(uid, sid, ts, seq, tuple(meas), tuple(diags), pack)

    @property
    def temperature_centiC(self) -> int | None:
        t = self.measurements[N_CELLS]
        return None if t.status & STATUS_MISSING else t.raw_value

    @property
    def cell_mV(self) -> list[int]:
        return [m.raw_value for m in self.measurements[:N_CELLS]]


def soc_pct(cell_mV: int) -> int:
    pct = round_half_up_div((cell_mV - SOC_EMPTY_MV) * 100, SOC_FULL_MV - SOC_EMPTY_MV)
    return min(100, max(0, pct))


def derive_diagnostics(cells: list[int], temp_centiC: int | None) -> tuple[tuple[CellDiagnostics, ...], PackDiagnostics]:
    if len(cells) != N_CELLS:
        raise ValueError(f"expected {N_CELLS} cell voltages")
    over_temp = temp_centiC is not None and temp_centiC > OT_CENTI_C
    diags = []
    bitmap = 0
    for i, v in enumerate(cells):
        flags = (FLAG_OV if v > OV_MV else 0) | (FLAG_UV if v < UV_MV else 0) | (FLAG_OT if over_temp else 0)
        if flags:
            bitmap |= 1 << i
        diags.append(CellDiagnostics(flags, soc_pct(v)))
    if over_temp:
        bitmap |= FAULT_BITMAP_OT
    temp = temp_centiC if temp_centiC is not None else 0
    status = BCC_ACTIVE | (BCC_FAULT if bitmap else 0) | (BCC_TEMP_MISSING if temp_centiC is None else 0)
    pack = PackDiagnostics(
        pack_voltage_mV=sum(cells),
        pack_current_mA=0,
        pack_soc_pct=round_half_up_div(sum(d.soc_pct for d in diags), N_CELLS),
        pack_soh_pct=SOH_PLACEHOLDER_PCT,
        min_cell_mV=min(cells),
        max_cell_mV=max(cells),
        avg_cell_mV=round_half_up_div(sum(cells), N_CELLS),
        min_temp_centiC=temp,
        max_temp_centiC=temp,
        fault_bitmap=bitmap,
        bcc_status=status,
    )
    return tuple(diags), pack


# -- orchestration --------------------------------------------------------


class CcbPhase(enum.Enum):
    UNCONFIGURED = "unconfigured"
    VALIDATED = "validated"
    INITIALIZED = "initialized"
    MONITORING = "monitoring"
    SHUTDOWN = "shutdown"


class InvalidPhase(RuntimeError):
    pass


class SystemShutdown(RuntimeError):
    pass


class AuthFailed(Exception):
    def __init__(self, result: AuthResult, report: InitReport):
        super().__init__(f"module authentication failed: {result.outcome.value}")
        self.result = result
        self.report = report


@dataclass
class InitReport:
    steps: list[tuple[str, float]] = field(default_factory=list)
    auth: AuthResult | None = None
    cached: bool = False
    start_ns: int = 0
    end_ns: int = 0

    @property
    def total_ms(self) -> float:
        return (self.end_ns - self.start_ns) / NS_PER_MS


@dataclass(frozen=True)
class Reading:
    temp_centiC: int | None
    payload: bytes
    elapsed_ms: float
    error: str | None = None


@dataclass
class CycleReport:
    start_ms: float
    end_ms: float
    sample: MonitoringSample
    record: EncryptedRecord | None
    steps: list[tuple[str, float]]

    @property
    def elapsed_ms(self) -> float:
        return self.end_ms - self.start_ms


@dataclass
class Ccb:
    """One cell-control board driving one battery module over NFC."""

    channel: Channel
    tag: NtagDevice
    module: BatteryModule
    allow_list: AllowList
    public_key: object
    policy: AuthPolicy = AuthPolicy.SHUTDOWN
    hsm: SecurityModule | None = None
    store: LogStore | None = None
    auth_enabled: bool = True
    addressed: bool = True
    cached_config: NtagConfig | None = None
    phase: CcbPhase = CcbPhase.UNCONFIGURED
    auth_outcome: AuthResult | None = None
    sequence_counter: int = 0
    latest_temperature: int | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def clock(self) -> SimClock:
        if self.channel.clock is None:
            self.channel.clock = SimClock()
        return self.channel.clock

    def _uid(self) -> bytes | None:
        return self.tag.uid if self.addressed else None

    def _require(self, *phases: CcbPhase) -> None:
        if self.phase is CcbPhase.SHUTDOWN:
            raise SystemShutdown("system shut down after failed module authentication")
        if self.phase not in phases:
            raise InvalidPhase(f"operation not allowed in phase {self.phase.value}")

    def _harvest_W(self) -> float:
        return self.clock.power.harvesting_extra_W if self.tag.energy.powered else 0.0

    def _timed(self, name: str, action, report: InitReport | None = None):
        start = self.clock.now_ms
        try:
            result = action()
        except (TagError, Timeout, FrameError) as exc:
            self.clock.charge(name, component="nfc_reader", outcome=type(exc).__name__, extra_W=self._harvest_W())
            raise
        self.clock.charge(name, component="nfc_reader", extra_W=self._harvest_W())
        if report is not None:
            report.steps.append((name, self.clock.now_ms - start))
        return result

    # -- initialisation phase -------------------------------------------------

    def run_init_phase(self, cached: bool = False) -> InitReport:
        self._require(CcbPhase.UNCONFIGURED)
        report = InitReport(cached=cached, start_ns=self.clock.now_ns)
        if self.auth_enabled:
            start = self.clock.now_ms
            try:
                result = authenticate_tag(self.channel, self.tag, self.allow_list, self.public_key, self.policy)
            except Timeout:
                self.clock.charge("authentication", component="ccb", outcome="Timeout")
                raise
            report.steps.append(("authentication", self.clock.now_ms - start))
            report.auth = self.auth_outcome = result
            if not result.accepted:
                if result.action is ActionTaken.SYSTEM_SHUTDOWN:
                    self.phase = CcbPhase.SHUTDOWN
                else:
                    self.warnings.append(f"module {self.tag.uid.hex()} rejected: {result.outcome.value}")
                report.end_ns = self.clock.now_ns
                raise AuthFailed(result, report)
        self.phase = CcbPhase.VALIDATED

        def eh_check():
            resp = self.channel.command(RequestFrame(Command.ENERGY_STATUS, uid=self._uid()), self.tag)
            if not resp.payload[0]:
                raise NotPowered(ErrorCode.NOT_POWERED)

        self._timed("eh_check", eh_check, report)

        if cached:
            if self.cached_config is None:
                raise InvalidPhase("cached initialisation requested but no configuration is cached")
        else:
            cfg = replace(self.tag.config, initialized=True, i2c_master_enabled=True, staging_block=0)
            self._timed(
                "ntag_init",
                lambda: self.channel.command(
                    RequestFrame(Command.SET_CONFIG, uid=self._uid(), payload=cfg.to_bytes()), self.tag
                ),
                report,
            )
            self._timed(
                "sensor_init",
                lambda: self.channel.command(
                    RequestFrame(
                        Command.I2C_WRITE, uid=self._uid(), block_address=SENSOR_ADDRESS,
                        payload=bytes([REG_CONTROL, CMD_INIT]),
                    ),
                    self.tag,
                ),
                report,
            )
            self.cached_config = cfg
        self.phase = CcbPhase.INITIALIZED
        report.end_ns = self.clock.now_ns
        return report

    # -- monitoring phase ---------------------------------------------------------

    def read_sensor_measurement(self) -> Reading:
        """Trigger the sensor, read its two SRAM blocks and decode the temperature.

        Raises on link or tag errors after booking the time spent; the cached
        temperature is cleared so the next sample reports it missing.
        """
        self._require(CcbPhase.INITIALIZED, CcbPhase.MONITORING)
        self.phase = CcbPhase.MONITORING
        self.module.advance_to(self.clock.now_ms)
        start = self.clock.now_ms
        staging = self.cached_config.staging_block if self.cached_config else 0

        def exchange() -> bytes:
            self.channel.command(
                RequestFrame(
                    Command.I2C_WRITE, uid=self._uid(), block_address=SENSOR_ADDRESS,
                    block_count=2, payload=bytes([REG_CONTROL, CMD_MEASURE]),
                ),
                self.tag,
            )
            resp = self.channel.command(
                RequestFrame(
                    Command.SRAM_CONTENT_READ, uid=self._uid(), block_address=staging,
                    block_count=SENSOR_READ_BLOCKS,
                ),
                self.tag,
            )
            return resp.payload

        try:
            payload = self._timed("sensor_measurement", exchange)
        except (TagError, Timeout, FrameError):
            self.latest_temperature = None
            self.clock.charge("inter_read_processing", component="nfc_reader")
            raise
        if len(payload) != SENSOR_READ_BLOCKS * BLOCK_SIZE:
            raise FrameError(f"expected {SENSOR_READ_BLOCKS * BLOCK_SIZE} payload bytes, got {len(payload)}")
        temp = decode_temperature(payload[:2])
        self.latest_temperature = temp
        self.clock.charge("inter_read_processing", component="nfc_reader")
        return Reading(temp, payload, self.clock.now_ms - start)

    def readout_loop(self, iterations: int) -> list[Reading]:
        """Repeated sensor reads; failed iterations are kept as readings with ``error`` set."""
        out = []
        for _ in range(iterations):
            start = self.clock.now_ms
            try:
                out.append(self.read_sensor_measurement())
            except (TagError, Timeout, FrameError) as exc:
                out.append(Reading(None, b"", self.clock.now_ms - start, type(exc).__name__))
        return out

    def read_full_sram(self) -> bytes:
        self._require(CcbPhase.INITIALIZED, CcbPhase.MONITORING)
        req = RequestFrame(Command.SRAM_CONTENT_READ, uid=self._uid(), block_address=0, block_count=64)
        return self._timed("full_sram_read", lambda: self.channel.command(req, self.tag)).payload

    def build_sample(self, temp_centiC: int | None, cells: list[int] | None = None) -> MonitoringSample:
        cells = self.module.cell_voltages() if cells is None else cells
        diags, pack = derive_diagnostics(cells, temp_centiC)
        now = self.clock.now_ms
        pack = replace(pack, uptime_s=int(now // 1000))
        meas = [
            Measurement(i + 1, v, STATUS_FAULT if diags[i].fault_flags & (FLAG_OV | FLAG_UV) else STATUS_OK)
            for i, v in enumerate(cells)
        ]
        if temp_centiC is None:
            meas.append(Measurement(TEMP_SENSOR_ID, 0, STATUS_MISSING))
        else:
            meas.append(Measurement(TEMP_SENSOR_ID, temp_centiC, STATUS_FAULT if temp_centiC > OT_CENTI_C else STATUS_OK))
        session = self.hsm.keys.session_id if self.hsm is not None and self.hsm.inserted else 0
        sample = MonitoringSample(
            module_uid=self.tag.uid,
            session_id=session,
            timestamp_ms=int(now) & 0xFFFFFFFF,
            sequence=self.sequence_counter,
            measurements=tuple(meas),
            cell_diagnostics=diags,
            pack=pack,
        )
        self.sequence_counter += 1
        return sample

    def run_monitoring_cycle(self, security: bool = True) -> CycleReport:
        """One sampling cycle: measure, derive diagnostics, then (optionally) pad,
        encrypt, tag and append to the log."""
        self._require(CcbPhase.INITIALIZED, CcbPhase.MONITORING)
        if security and (self.hsm is None or not self.hsm.inserted):
            raise NoSessionKey("insert session keys before running secured cycles")
        self.phase = CcbPhase.MONITORING
        clock = self.clock
        start = clock.now_ms
        steps = []

        self.module.advance_to(clock.now_ms)
        cells = self.module.cell_voltages()
        temp = self.latest_temperature
        t0 = clock.now_ms
        clock.charge("measurement_only", component="bms")
        steps.append(("measurement_only", clock.now_ms - t0))
        t0 = clock.now_ms
        sample = self.build_sample(temp, cells)
        clock.charge("diagnostics", component="bms")
        steps.append(("diagnostics", clock.now_ms - t0))

        record = None
        if security:
            t0 = clock.now_ms
            padded = pad(sample.to_bytes())
            clock.charge("data_processing", component="bms")
            steps.append(("data_processing", clock.now_ms - t0))
            t0 = clock.now_ms
            record = self.hsm.encrypt_record(padded, sample.sequence)
            steps.append(("security_ops", clock.now_ms - t0))
            if self.store is not None:
                self.store.append(record)
        return CycleReport(start, clock.now_ms, sample, record, steps)
