"""Simulated contactless link between one reader and the tags in its field.

Field model: full supply (3000 mV) up to the nominal distance, falling
linearly to zero at the maximum range, zero beyond it or with the field off.

Faults are applied to the encoded byte stream with a seeded RNG, so the
CRC is what catches corruption.  Each transceive draws exactly three random
numbers (drop, corrupt, bit position) whether or not a fault fires, keeping
fault sequences aligned across runs that differ only in payload.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .frames import (
    Command,
    CrcMismatch,
    ErrorCode,
    FrameError,
    RequestFrame,
    ResponseFrame,
    UnknownCommand,
    decode_request,
    decode_response,
    encode_request,
    encode_response,
    hexdump,
)
from .ntag import MAX_HARVEST_MV, NtagDevice
from .simclock import SimClock


class Timeout(Exception):
    """No (valid) response arrived."""


class PackSealed(Exception):
    """External handle refused: the pack enclosure isolates the NFC interface."""


class TagError(Exception):
    code: ErrorCode

    def __init__(self, code: ErrorCode, msg: str = ""):
        super().__init__(msg or code.name)
        self.code = code


class NotPowered(TagError):
    pass


class NotInitialized(TagError):
    pass


class TagI2cNack(TagError):
    pass


_ERROR_TYPES = {
    ErrorCode.NOT_POWERED: NotPowered,
    ErrorCode.NOT_INITIALIZED: NotInitialized,
    ErrorCode.I2C_NACK: TagI2cNack,
}


def raise_for_error(resp: ResponseFrame) -> ResponseFrame:
    if resp.error:
        code = resp.error_code
        raise _ERROR_TYPES.get(code, TagError)(code)
    return resp


@dataclass(frozen=True)
class FieldModel:
    distance_cm: float = 2.0
    max_range_cm: float = 5.4
    nominal_distance_cm: float = 2.0
    reader_field_on: bool = True


def field_voltage(model: FieldModel) -> float:
    """Voltage (mV) the reader field offers a tag at ``model.distance_cm``."""
    d = model.distance_cm
    if not model.reader_field_on or d > model.max_range_cm:
        return 0.0
    if d <= model.nominal_distance_cm:
        return float(MAX_HARVEST_MV)
    span = model.max_range_cm - model.nominal_distance_cm
    return MAX_HARVEST_MV * (model.max_range_cm - d) / span


@dataclass(frozen=True)
class ChannelConfig:
    drop_probability: float = 0.0
    corrupt_probability: float = 0.0
    rng_seed: int = 0
    # C3: tags beyond range are unreachable; off models an unconstrained long-range probe
    enforce_range: bool = True
    # C2: sealed pack refuses handles that come from outside the enclosure
    sealed: bool = True
    external: bool = False

    def __post_init__(self) -> None:
        for name in ("drop_probability", "corrupt_probability"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class TranscriptEntry:
    t_ms: float
    kind: str  # req | rsp | drop | silent | blocked
    uid: str
    command: str
    data: bytes = b""

    def line(self) -> str:
        return f"{self.t_ms:.6f} {self.kind} {self.uid} {self.command} {hexdump(self.data)}".rstrip()


@dataclass
class Channel:
    config: ChannelConfig = field(default_factory=ChannelConfig)
    field_model: FieldModel = field(default_factory=FieldModel)
    clock: SimClock | None = None
    name: str = "reader"
    transcript: list[TranscriptEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._rng = random.Random(self.config.rng_seed)
        self._placements: dict[bytes, tuple[NtagDevice, float]] = {}

    # -- topology -------------------------------------------------------

    def place(self, tag: NtagDevice, distance_cm: float) -> None:
        if distance_cm < 0:
            raise ValueError("distance must be non-negative")
        self._placements[tag.uid] = (tag, float(distance_cm))

    def move(self, tag: NtagDevice, distance_cm: float) -> None:
        self.place(tag, distance_cm)

    def remove(self, tag: NtagDevice) -> None:
        self._placements.pop(tag.uid, None)

    def distance_of(self, tag: NtagDevice) -> float:
        return self._placements[tag.uid][1]

    def field_for(self, tag: NtagDevice) -> FieldModel:
        return replace(self.field_model, distance_cm=self.distance_of(tag))

    def voltage_for(self, tag: NtagDevice) -> float:
        return field_voltage(self.field_for(tag))

    @property
    def tags(self) -> list[NtagDevice]:
        return [t for t, _ in self._placements.values()]

    # -- operations ---------------------------------------------------------

    def discover(self) -> list[bytes]:
        """Return UIDs of every tag the field reaches, ascending."""
        if self.clock is not None:
            self.clock.charge("discovery", component="nfc_reader")
        found = []
        for uid, (tag, _) in self._placements.items():
            v = self.voltage_for(tag)
            if v > 0 or not self.config.enforce_range:
                tag.energy_check(v)
                found.append(uid)
        return sorted(found)

    def _now(self) -> float:
        return self.clock.now_ms if self.clock is not None else 0.0

    def _log(self, kind: str, tag: NtagDevice, command: str, data: bytes = b"") -> None:
        self.transcript.append(TranscriptEntry(self._now(), kind, tag.uid.hex(), command, bytes(data)))

    def _tag_side(self, tag: NtagDevice, data: bytes) -> bytes | None:
        """Deliver raw bytes to the tag; returns the encoded reply or None for silence."""
        v = self.voltage_for(tag)
        tag.energy_check(v)
        if v <= 0 and self.config.enforce_range:
            return None
        try:
            req = decode_request(data)
        except UnknownCommand:
            return encode_response(ResponseFrame.failure(ErrorCode.UNKNOWN_COMMAND))
        except FrameError:
            return None
        resp = tag.handle_command(req)
        return None if resp is None else encode_response(resp)

    def _air(self, tag: NtagDevice, label: str, data: bytes) -> bytes:
        if self.config.external and self.config.sealed:
            self._log("blocked", tag, label, data)
            raise PackSealed(f"{self.name}: external access to sealed pack refused")
        if tag.uid not in self._placements:
            raise Timeout(f"tag {tag.uid.hex()} not in this reader's field")
        self._log("req", tag, label, data)
        u_drop = self._rng.random()
        u_corrupt = self._rng.random()
        bit = self._rng.getrandbits(16)
        if u_drop < self.config.drop_probability:
            self._log("drop", tag, label)
            raise Timeout(f"{label}: frame dropped")
        reply = self._tag_side(tag, data)
        if reply is None:
            self._log("silent", tag, label)
            raise Timeout(f"{label}: no response")
        if u_corrupt < self.config.corrupt_probability:
            pos = bit % (len(reply) * 8)
            buf = bytearray(reply)
            buf[pos // 8] ^= 1 << (pos % 8)
            reply = bytes(buf)
        self._log("rsp", tag, label, reply)
        return reply

    def transceive(self, req: RequestFrame, tag: NtagDevice) -> ResponseFrame:
        """Send one request and return the decoded reply (may be an error response)."""
        return decode_response(self._air(tag, Command(req.command).name, encode_request(req)))

    def transceive_raw(self, data: bytes, tag: NtagDevice) -> bytes:
        """Fuzzing path: arbitrary bytes out, raw reply bytes back."""
        return self._air(tag, "RAW", bytes(data))

    def command(self, req: RequestFrame, tag: NtagDevice) -> ResponseFrame:
        """``transceive`` that raises :class:`TagError` subclasses for error replies."""
        return raise_for_error(self.transceive(req, tag))

    def responses(self) -> list[TranscriptEntry]:
        return [e for e in self.transcript if e.kind == "rsp"]


def transceive(req: RequestFrame, tag: NtagDevice, channel: Channel) -> ResponseFrame:
    return channel.transceive(req, tag)


__all__ = [
    "Channel",
    "ChannelConfig",
    "CrcMismatch",
    "FieldModel",
    "NotInitialized",
    "NotPowered",
    "PackSealed",
    "TagError",
    "TagI2cNack",
    "Timeout",
    "TranscriptEntry",
    "field_voltage",
    "raise_for_error",
    "transceive",
]
