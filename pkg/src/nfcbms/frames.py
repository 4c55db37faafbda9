"""Byte-level codec for reader -> tag requests and tag -> reader responses.

Request layout (multi-byte integers little-endian)::

    flags(1) command(1) [uid(8) if addressed] block_address(2) block_count(1) payload(*) crc(2)

which gives a 15-byte header when addressed and 7 bytes otherwise.
Response layout::

    flags(1) payload(*) crc(2)

The CRC is CRC-16/X-25 over every byte that precedes it.  Error responses
set bit 0 of the flags byte and carry a one-byte :class:`ErrorCode`.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

SRAM_BLOCKS = 64
BLOCK_SIZE = 4
UID_LEN = 8

ADDRESSED_HEADER_LEN = 15
UNADDRESSED_HEADER_LEN = 7
RESPONSE_HEADER_LEN = 3

FLAG_ADDRESSED = 0x01
FLAG_ERROR = 0x01


class FrameError(Exception):
    """Base class for codec failures."""


class CrcMismatch(FrameError):
    pass


class Truncated(FrameError):
    pass


class UnknownCommand(FrameError):
    pass


class InvalidFrame(FrameError):
    pass


class Command(enum.IntEnum):
    I2C_WRITE = 0xD4
    I2C_READ = 0xD5
    SRAM_CONTENT_READ = 0xD2
    SRAM_WRITE = 0xD3
    GET_CONFIG = 0xC0
    SET_CONFIG = 0xC1
    READ_SIGNATURE = 0xBD
    ENERGY_STATUS = 0xC2


SRAM_COMMANDS = frozenset({Command.SRAM_CONTENT_READ, Command.SRAM_WRITE})


class ErrorCode(enum.IntEnum):
    NOT_POWERED = 0x01
    NOT_INITIALIZED = 0x02
    I2C_NACK = 0x03
    WRITE_PROTECTED = 0x04
    UNKNOWN_COMMAND = 0x05
    BAD_ARGUMENT = 0x06
    I2C_DISABLED = 0x07


# ---------------------------------------------------------------------------
# CRC-16/X-25: reflected poly 0x1021 (0x8408 reversed), init 0xFFFF, xorout 0xFFFF


def _make_table() -> tuple[int, ...]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = (crc >> 1) ^ 0x8408 if crc & 1 else crc >> 1
        table.append(crc)
    return tuple(table)


_CRC_TABLE = _make_table()


def crc16(data: bytes) -> int:
    crc = 0xFFFF
    for b in data:
        crc = (crc >> 8) ^ _CRC_TABLE[(crc ^ b) & 0xFF]
    return crc ^ 0xFFFF


def _append_crc(body: bytes) -> bytes:
    return body + struct.pack("<H", crc16(body))


def _check_crc(data: bytes) -> int:
    stored = struct.unpack_from("<H", data, len(data) - 2)[0]
    if crc16(data[:-2]) != stored:
        raise CrcMismatch(f"stored crc {stored:#06x} does not match frame contents")
    return stored


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrameFlags:
    addressed: bool
    command_class: Command

    def to_byte(self) -> int:
        return FLAG_ADDRESSED if self.addressed else 0


@dataclass(frozen=True)
class RequestFrame:
    command: Command
    uid: bytes | None = None
    block_address: int = 0
    block_count: int = 0
    payload: bytes = b""
    # Filled in by decode_request; excluded from equality so round trips compare cleanly.
    crc: int | None = field(default=None, compare=False)

    @property
    def addressed(self) -> bool:
        return self.uid is not None

    @property
    def flags(self) -> FrameFlags:
        return FrameFlags(self.addressed, Command(self.command))

    @property
    def header_len(self) -> int:
        return ADDRESSED_HEADER_LEN if self.addressed else UNADDRESSED_HEADER_LEN

    def validate(self) -> None:
        try:
            Command(self.command)
        except ValueError:
            raise UnknownCommand(f"command code {self.command:#04x}") from None
        if self.uid is not None and len(self.uid) != UID_LEN:
            raise InvalidFrame(f"uid must be {UID_LEN} bytes, got {len(self.uid)}")
        if not 0 <= self.block_address <= 0xFFFF:
            raise InvalidFrame("block_address outside 16-bit range")
        if not 0 <= self.block_count <= 0xFF:
            raise InvalidFrame("block_count outside 8-bit range")
        if self.command in SRAM_COMMANDS:
            if self.block_address + self.block_count > SRAM_BLOCKS:
                raise InvalidFrame(
                    f"blocks {self.block_address}+{self.block_count} exceed the {SRAM_BLOCKS}-block SRAM"
                )
        if self.command == Command.SRAM_WRITE and len(self.payload) != BLOCK_SIZE * self.block_count:
            raise InvalidFrame(
                f"SRAM write of {self.block_count} blocks needs {BLOCK_SIZE * self.block_count} "
                f"payload bytes, got {len(self.payload)}"
            )


@dataclass(frozen=True)
class ResponseFrame:
    payload: bytes = b""
    error: bool = False
    crc: int | None = field(default=None, compare=False)

    @classmethod
    def failure(cls, code: ErrorCode) -> ResponseFrame:
        return cls(payload=bytes([code]), error=True)

    @property
    def error_code(self) -> ErrorCode | None:
        if not self.error:
            return None
        if len(self.payload) != 1:
            raise InvalidFrame("error response must carry exactly one code byte")
        return ErrorCode(self.payload[0])


def encode_request(frame: RequestFrame) -> bytes:
    frame.validate()
    body = bytes([frame.flags.to_byte(), int(frame.command)])
    if frame.uid is not None:
        body += bytes(frame.uid)
    body += struct.pack("<HB", frame.block_address, frame.block_count)
    body += bytes(frame.payload)
    return _append_crc(body)


def decode_request(data: bytes) -> RequestFrame:
    data = bytes(data)
    if len(data) < UNADDRESSED_HEADER_LEN:
        raise Truncated(f"{len(data)} bytes is shorter than the minimum request header")
    crc = _check_crc(data)
    addressed = bool(data[0] & FLAG_ADDRESSED)
    if addressed and len(data) < ADDRESSED_HEADER_LEN:
        raise Truncated(f"addressed request needs {ADDRESSED_HEADER_LEN} bytes, got {len(data)}")
    code = data[1]
    try:
        command = Command(code)
    except ValueError:
        raise UnknownCommand(f"command code {code:#04x}") from None
    pos = 2
    uid = None
    if addressed:
        uid = data[pos : pos + UID_LEN]
        pos += UID_LEN
    block_address, block_count = struct.unpack_from("<HB", data, pos)
    pos += 3
    frame = RequestFrame(
        command=command,
        uid=uid,
        block_address=block_address,
        block_count=block_count,
        payload=data[pos:-2],
        crc=crc,
    )
    frame.validate()
    return frame


def encode_response(frame: ResponseFrame) -> bytes:
    return _append_crc(bytes([FLAG_ERROR if frame.error else 0]) + bytes(frame.payload))


def decode_response(data: bytes) -> ResponseFrame:
    data = bytes(data)
    if len(data) < RESPONSE_HEADER_LEN:
        raise Truncated(f"{len(data)} bytes is shorter than the response header")
    crc = _check_crc(data)
    return ResponseFrame(payload=data[1:-2], error=bool(data[0] & FLAG_ERROR), crc=crc)


def hexdump(data: bytes) -> str:
    """Render bytes as ``XX XX ..`` (upper case, single spaces)."""
    return " ".join(f"{b:02X}" for b in data)


def parse_hexdump(text: str) -> bytes:
    return bytes.fromhex("".join(text.split()))
