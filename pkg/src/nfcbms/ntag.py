"""Passive NFC tag on the battery module.

The tag owns a 256-byte SRAM (64 blocks of 4 bytes), a locked 32-byte
originality signature, a small configuration record and an energy-harvest
state.  All traffic arrives as decoded :class:`~nfcbms.frames.RequestFrame`
objects through :meth:`NtagDevice.handle_command`; failures are reported on
the wire as error responses, never as Python exceptions.

Argument conventions for the non-SRAM commands:

* ``I2C_WRITE``: ``block_address`` = 7-bit device address, ``payload`` =
  bytes written, ``block_count`` = optional read-back length (repeated start).
* ``I2C_READ``: ``block_address`` = device address, ``payload`` = optional
  register pointer, ``block_count`` = bytes to read.
* ``SET_CONFIG`` / ``GET_CONFIG``: 4-byte config record, see
  :meth:`NtagConfig.to_bytes`.
* ``ENERGY_STATUS``: reply ``powered(1) harvested_mV(2, LE)``.

Bytes read from I2C are staged in SRAM at ``config.staging_block`` and
zero-padded to whole blocks.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

from .battery import I2cBus, I2cNack
from .frames import (
    BLOCK_SIZE,
    SRAM_BLOCKS,
    UID_LEN,
    Command,
    ErrorCode,
    RequestFrame,
    ResponseFrame,
)

SRAM_SIZE = SRAM_BLOCKS * BLOCK_SIZE
SIGNATURE_LEN = 32
MAX_HARVEST_MV = 3000
DEFAULT_SETPOINT_MV = 3000

# Serviced regardless of harvest state.
UNGATED = frozenset({Command.READ_SIGNATURE, Command.ENERGY_STATUS})
# Need power but not a prior SET_CONFIG, otherwise the tag could never be initialised.
CONFIG_COMMANDS = frozenset({Command.GET_CONFIG, Command.SET_CONFIG})


class BadLength(ValueError):
    pass


class WriteProtected(Exception):
    pass


@dataclass
class NtagConfig:
    eh_voltage_setpoint_mV: int = DEFAULT_SETPOINT_MV
    i2c_master_enabled: bool = False
    initialized: bool = False
    staging_block: int = 0

    def to_bytes(self) -> bytes:
        bits = int(self.i2c_master_enabled) | (int(self.initialized) << 1)
        return struct.pack("<HBB", self.eh_voltage_setpoint_mV, bits, self.staging_block)

    @classmethod
    def from_bytes(cls, raw: bytes) -> NtagConfig:
        if len(raw) != 4:
            raise BadLength(f"config record is 4 bytes, got {len(raw)}")
        setpoint, bits, staging = struct.unpack("<HBB", raw)
        return cls(setpoint, bool(bits & 1), bool(bits & 2), staging)


@dataclass
class EnergyState:
    powered: bool = False
    harvested_voltage_mV: int = 0


@dataclass
class NtagDevice:
    uid: bytes
    _signature: bytes = field(repr=False)
    config: NtagConfig = field(default_factory=NtagConfig)
    energy: EnergyState = field(default_factory=EnergyState)
    sram: bytearray = field(default_factory=lambda: bytearray(SRAM_SIZE), repr=False)
    bus: I2cBus | None = field(default=None, repr=False)

    @property
    def signature(self) -> bytes:
        return self._signature

    @signature.setter
    def signature(self, value: bytes) -> None:
        raise WriteProtected("originality signature is locked after provisioning")

    def attach_bus(self, bus: I2cBus) -> None:
        self.bus = bus

    # -- energy ---------------------------------------------------------

    def energy_check(self, field_mV: float) -> EnergyState:
        """Update the harvest state for the field currently offered by the reader."""
        self.energy.harvested_voltage_mV = int(min(MAX_HARVEST_MV, max(0, field_mV)))
        self._refresh_power()
        return self.energy

    def _refresh_power(self) -> None:
        self.energy.powered = self.energy.harvested_voltage_mV >= self.config.eh_voltage_setpoint_mV

    # -- command dispatch -------------------------------------------------

    def handle_command(self, req: RequestFrame, bus: I2cBus | None = None) -> ResponseFrame | None:
        """Service one request; ``None`` means the tag stays silent."""
        if req.uid is not None and bytes(req.uid) != self.uid:
            return None
        cmd = req.command
        if cmd not in UNGATED:
            if not self.energy.powered:
                return ResponseFrame.failure(ErrorCode.NOT_POWERED)
            if cmd not in CONFIG_COMMANDS and not self.config.initialized:
                return ResponseFrame.failure(ErrorCode.NOT_INITIALIZED)
        handler = _HANDLERS.get(cmd)
        if handler is None:
            return ResponseFrame.failure(ErrorCode.UNKNOWN_COMMAND)
        return handler(self, req, bus if bus is not None else self.bus)

    def _read_signature(self, req, bus):
        return ResponseFrame(self._signature)

    def _energy_status(self, req, bus):
        e = self.energy
        return ResponseFrame(struct.pack("<BH", int(e.powered), e.harvested_voltage_mV))

    def _get_config(self, req, bus):
        return ResponseFrame(self.config.to_bytes())

    def _set_config(self, req, bus):
        try:
            cfg = NtagConfig.from_bytes(req.payload)
        except BadLength:
            return ResponseFrame.failure(ErrorCode.BAD_ARGUMENT)
        if cfg.staging_block >= SRAM_BLOCKS or cfg.eh_voltage_setpoint_mV > MAX_HARVEST_MV:
            return ResponseFrame.failure(ErrorCode.BAD_ARGUMENT)
        self.config = cfg
        self._refresh_power()
        return ResponseFrame()

    def _sram_read(self, req, bus):
        start = req.block_address * BLOCK_SIZE
        return ResponseFrame(bytes(self.sram[start : start + req.block_count * BLOCK_SIZE]))

    def _sram_write(self, req, bus):
        start = req.block_address * BLOCK_SIZE
        self.sram[start : start + len(req.payload)] = req.payload
        return ResponseFrame()

    def _i2c(self, req, bus):
        if not self.config.i2c_master_enabled:
            return ResponseFrame.failure(ErrorCode.I2C_DISABLED)
        if bus is None:
            return ResponseFrame.failure(ErrorCode.I2C_NACK)
        if req.command == Command.I2C_READ and len(req.payload) > 1:
            return ResponseFrame.failure(ErrorCode.BAD_ARGUMENT)
        n = req.block_count
        blocks = -(-n // BLOCK_SIZE)
        if self.config.staging_block + blocks > SRAM_BLOCKS:
            return ResponseFrame.failure(ErrorCode.BAD_ARGUMENT)
        try:
            data = bus.transact(req.block_address & 0x7F, req.payload, n)
        except I2cNack:
            return ResponseFrame.failure(ErrorCode.I2C_NACK)
        if n:
            start = self.config.staging_block * BLOCK_SIZE
            self.sram[start : start + blocks * BLOCK_SIZE] = data.ljust(blocks * BLOCK_SIZE, b"\x00")
        return ResponseFrame()


_HANDLERS = {
    Command.READ_SIGNATURE: NtagDevice._read_signature,
    Command.ENERGY_STATUS: NtagDevice._energy_status,
    Command.GET_CONFIG: NtagDevice._get_config,
    Command.SET_CONFIG: NtagDevice._set_config,
    Command.SRAM_CONTENT_READ: NtagDevice._sram_read,
    Command.SRAM_WRITE: NtagDevice._sram_write,
    Command.I2C_WRITE: NtagDevice._i2c,
    Command.I2C_READ: NtagDevice._i2c,
}


def provision(uid: bytes, signature: bytes, config: NtagConfig | None = None) -> NtagDevice:
    if len(uid) != UID_LEN:
        raise BadLength(f"uid must be {UID_LEN} bytes, got {len(uid)}")
    if len(signature) != SIGNATURE_LEN:
        raise BadLength(f"signature must be {SIGNATURE_LEN} bytes, got {len(signature)}")
    return NtagDevice(uid=bytes(uid), _signature=bytes(signature), config=config or NtagConfig())


# -- provisioning files ---------------------------------------------------


def tag_to_json(tag: NtagDevice) -> dict:
    c = tag.config
    return {
        "uid": tag.uid.hex(),
        "signature": tag.signature.hex(),
        "config": {
            "eh_voltage_setpoint_mV": c.eh_voltage_setpoint_mV,
            "i2c_master_enabled": c.i2c_master_enabled,
            "initialized": c.initialized,
            "staging_block": c.staging_block,
        },
    }


def tag_from_json(doc: dict) -> NtagDevice:
    cfg = NtagConfig(**doc.get("config", {}))
    return provision(bytes.fromhex(doc["uid"]), bytes.fromhex(doc["signature"]), cfg)


def load_tag(path: str | Path) -> NtagDevice:
    return tag_from_json(json.loads(Path(path).read_text()))


def save_tag(tag: NtagDevice, path: str | Path) -> None:
    Path(path).write_text(json.dumps(tag_to_json(tag), indent=2, sort_keys=True) + "\n")
