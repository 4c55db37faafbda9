"""Battery module emulator: 14 cell voltages plus one I2C temperature sensor.

Cell voltages reach the cell-control board over the hardwired BCC path and
are read directly.  The temperature travels through the NFC tag's I2C
bridge, so the sensor is modelled at register level.

Sensor register map (one auto-incrementing pointer):

====  ==========================================================
0x00  control; write 0x01 = initialise, 0x2E = latch measurement
0x01  temperature, high byte (signed centi-degrees, big-endian)
0x02  temperature, low byte
0x03  status; bit 0 = measurement latched
0x04  chip id (0x55)
====  ==========================================================
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

N_CELLS = 14
CELL_MIN_MV = 2000
CELL_MAX_MV = 4500
TEMP_MIN_CENTI = -4000
TEMP_MAX_CENTI = 12500

SENSOR_ADDRESS = 0x77
CHIP_ID = 0x55

REG_CONTROL = 0x00
REG_TEMP_MSB = 0x01
REG_TEMP_LSB = 0x02
REG_STATUS = 0x03
REG_CHIP_ID = 0x04
N_REGISTERS = 0x08

CMD_INIT = 0x01
CMD_MEASURE = 0x2E


class I2cNack(Exception):
    """No device acknowledged, or the device refused in its current state."""


class OutOfRange(ValueError):
    pass


class I2cDevice(Protocol):
    def transact(self, write: bytes, read_len: int) -> bytes: ...


class I2cBus:
    def __init__(self) -> None:
        self.devices: dict[int, I2cDevice] = {}

    def attach(self, address: int, device: I2cDevice) -> None:
        if not 0 <= address < 0x80:
            raise ValueError(f"7-bit I2C address expected, got {address:#x}")
        self.devices[address] = device

    def transact(self, address: int, write: bytes, read_len: int) -> bytes:
        device = self.devices.get(address)
        if device is None:
            raise I2cNack(f"no device at {address:#04x}")
        return device.transact(bytes(write), read_len)


def i2c_transact(bus: I2cBus, address: int, write_bytes: bytes, read_len: int) -> bytes:
    return bus.transact(address, write_bytes, read_len)


def encode_temperature(centi_c: int) -> bytes:
    return int(centi_c).to_bytes(2, "big", signed=True)


def decode_temperature(raw: bytes) -> int:
    return int.from_bytes(raw[:2], "big", signed=True)


class SensorState(enum.Enum):
    STANDBY = "standby"
    INITIALIZED = "initialized"


@dataclass
class TemperatureSensor:
    i2c_address: int = SENSOR_ADDRESS
    temperature_centi_C: int = 2500
    state: SensorState = SensorState.STANDBY
    _pointer: int = 0
    _latched: int | None = None

    def transact(self, write: bytes, read_len: int) -> bytes:
        if write:
            self._pointer = write[0]
            for value in write[1:]:
                self._write_register(self._pointer, value)
                self._pointer += 1
        out = bytearray()
        for _ in range(read_len):
            out.append(self._read_register(self._pointer))
            self._pointer += 1
        return bytes(out)

    def _write_register(self, reg: int, value: int) -> None:
        if reg != REG_CONTROL:
            raise I2cNack(f"register {reg:#04x} is read-only")
        if value == CMD_INIT:
            self.state = SensorState.INITIALIZED
        elif value == CMD_MEASURE:
            if self.state is not SensorState.INITIALIZED:
                raise I2cNack("measurement requested before sensor init")
            self._latched = self.temperature_centi_C
        else:
            raise I2cNack(f"unknown control value {value:#04x}")

    def _read_register(self, reg: int) -> int:
        if reg >= N_REGISTERS:
            raise I2cNack(f"register {reg:#04x} out of range")
        if reg == REG_CHIP_ID:
            return CHIP_ID
        if reg == REG_CONTROL:
            return 0
        if self.state is not SensorState.INITIALIZED:
            raise I2cNack("sensor in standby")
        if reg in (REG_TEMP_MSB, REG_TEMP_LSB):
            value = self._latched if self._latched is not None else self.temperature_centi_C
            return encode_temperature(value)[reg - REG_TEMP_MSB]
        if reg == REG_STATUS:
            return int(self._latched is not None)
        return 0


@dataclass
class CellState:
    voltage_mV: int = 3700


@dataclass(frozen=True)
class ProfilePoint:
    t_ms: float
    cell_mV: tuple[int, ...]
    temp_centiC: int

    def __post_init__(self) -> None:
        if len(self.cell_mV) != N_CELLS:
            raise ValueError(f"profile point needs {N_CELLS} cell voltages, got {len(self.cell_mV)}")


def constant_profile(cell_mV: int = 3700, temp_centiC: int = 2550) -> list[ProfilePoint]:
    return [ProfilePoint(0.0, (cell_mV,) * N_CELLS, temp_centiC)]


def load_profile(path: str | Path) -> list[ProfilePoint]:
    """Read a profile file: a JSON list of ``{t_ms, cell_mV[14], temp_centiC}``."""
    rows = json.loads(Path(path).read_text())
    return [ProfilePoint(float(r["t_ms"]), tuple(int(v) for v in r["cell_mV"]), int(r["temp_centiC"])) for r in rows]


def dump_profile(points: Sequence[ProfilePoint]) -> str:
    return json.dumps(
        [{"t_ms": p.t_ms, "cell_mV": list(p.cell_mV), "temp_centiC": p.temp_centiC} for p in points],
        indent=2,
    )


@dataclass
class BatteryModule:
    cells: list[CellState] = field(default_factory=lambda: [CellState() for _ in range(N_CELLS)])
    sensor: TemperatureSensor = field(default_factory=TemperatureSensor)
    i2c_bus: I2cBus = field(default_factory=I2cBus)
    profile: list[ProfilePoint] = field(default_factory=constant_profile)

    def __post_init__(self) -> None:
        if len(self.cells) != N_CELLS:
            raise ValueError(f"a module has exactly {N_CELLS} cells")
        self.i2c_bus.attach(self.sensor.i2c_address, self.sensor)
        self.advance_to(0.0)

    def set_profile(self, profile: Sequence[ProfilePoint], allow_faults: bool = False) -> None:
        points = sorted(profile, key=lambda p: p.t_ms)
        if not points:
            raise ValueError("empty profile")
        if not allow_faults:
            for p in points:
                bad = [v for v in p.cell_mV if not CELL_MIN_MV <= v <= CELL_MAX_MV]
                if bad:
                    raise OutOfRange(f"cell voltage {bad[0]} mV at t={p.t_ms} ms outside {CELL_MIN_MV}-{CELL_MAX_MV}")
        for p in points:
            if not TEMP_MIN_CENTI <= p.temp_centiC <= TEMP_MAX_CENTI:
                raise OutOfRange(f"temperature {p.temp_centiC} outside sensor range")
        self.profile = points

    def point_at(self, t_ms: float) -> ProfilePoint:
        current = self.profile[0]
        for p in self.profile:
            if p.t_ms <= t_ms:
                current = p
            else:
                break
        return current

    def advance_to(self, t_ms: float) -> None:
        p = self.point_at(t_ms)
        for cell, mv in zip(self.cells, p.cell_mV):
            cell.voltage_mV = mv
        self.sensor.temperature_centi_C = p.temp_centiC

    def cell_voltages(self) -> list[int]:
        return [c.voltage_mV for c in self.cells]


def set_profile(module: BatteryModule, profile: Sequence[ProfilePoint], allow_faults: bool = False) -> None:
    module.set_profile(profile, allow_faults=allow_faults)
