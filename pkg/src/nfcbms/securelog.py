"""Sample protection: PKCS#7 padding, AES-128-CBC, CMAC (encrypt-then-MAC), and
an append-only record file.

Log file layout::

    header   8 bytes   b"NFCBLG" | version (u8 = 1) | flags (u8, bit 0 = protected)
    record 216 bytes   session_id (u32 LE) | sequence (u32 LE) | iv (16) | ciphertext (176) | tag (16)

The tag is CMAC(mac_key, session_id || sequence || iv || ciphertext).
An unprotected log (flags bit 0 clear) stores the padded plaintext in the
ciphertext slot and a zero tag; it exists to ablate the data-security
countermeasure and cannot be verified.
"""

from __future__ import annotations

import enum
import hmac
import os
import random
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from cryptography.hazmat.primitives import cmac
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .simclock import SimClock

SAMPLE_LEN = 162
PADDED_LEN = 176
AES_BLOCK = 16
RECORD_LEN = 4 + 4 + 16 + PADDED_LEN + 16
MAGIC = b"NFCBLG"
VERSION = 1
HEADER_LEN = 8
FLAG_PROTECTED = 0x01


class SecureLogError(Exception):
    pass


class BadLength(SecureLogError, ValueError):
    pass


class NoSessionKey(SecureLogError):
    pass


class AlreadyInserted(SecureLogError):
    pass


class IntegrityFailure(SecureLogError):
    pass


class PaddingError(SecureLogError):
    pass


class StorageFull(SecureLogError):
    pass


class CorruptEntry(SecureLogError):
    pass


def pad(sample: bytes) -> bytes:
    if len(sample) != SAMPLE_LEN:
        raise BadLength(f"sample must be {SAMPLE_LEN} bytes, got {len(sample)}")
    n = AES_BLOCK - len(sample) % AES_BLOCK
    return bytes(sample) + bytes([n]) * n


def unpad(padded: bytes) -> bytes:
    if not padded or len(padded) % AES_BLOCK:
        raise PaddingError("padded length is not a whole number of blocks")
    n = padded[-1]
    if not 1 <= n <= AES_BLOCK or padded[-n:] != bytes([n]) * n:
        raise PaddingError("invalid PKCS#7 padding")
    return padded[:-n]


def cbc_encrypt(key: bytes, iv: bytes, data: bytes) -> bytes:
    enc = Cipher(algorithms.AES(key), modes.CBC(iv)).encryptor()
    return enc.update(data) + enc.finalize()


def cbc_decrypt(key: bytes, iv: bytes, data: bytes) -> bytes:
    dec = Cipher(algorithms.AES(key), modes.CBC(iv)).decryptor()
    return dec.update(data) + dec.finalize()


def cmac_tag(key: bytes, data: bytes) -> bytes:
    c = cmac.CMAC(algorithms.AES(key))
    c.update(data)
    return c.finalize()


@dataclass
class SessionKeys:
    enc_key: bytes
    mac_key: bytes
    session_id: int

    def __post_init__(self) -> None:
        if len(self.enc_key) != 16 or len(self.mac_key) != 16:
            raise BadLength("AES-128 keys are 16 bytes")
        if self.enc_key == self.mac_key:
            raise ValueError("encryption and MAC keys must differ")
        if not 0 <= self.session_id < 2**32:
            raise ValueError("session_id is a 32-bit value")

    @classmethod
    def generate(cls, rng: random.Random, session_id: int | None = None) -> SessionKeys:
        enc = rng.randbytes(16)
        mac = rng.randbytes(16)
        while mac == enc:
            mac = rng.randbytes(16)
        sid = rng.getrandbits(32) if session_id is None else session_id
        return cls(enc, mac, sid)

    def to_json(self) -> dict:
        return {"enc_key": self.enc_key.hex(), "mac_key": self.mac_key.hex(), "session_id": self.session_id}

    @classmethod
    def from_json(cls, doc: dict) -> SessionKeys:
        return cls(bytes.fromhex(doc["enc_key"]), bytes.fromhex(doc["mac_key"]), int(doc["session_id"]))


@dataclass(frozen=True)
class EncryptedRecord:
    session_id: int
    sequence: int
    iv: bytes
    ciphertext: bytes
    tag: bytes

    @property
    def header(self) -> bytes:
        return struct.pack("<II", self.session_id, self.sequence)

    @property
    def authenticated_bytes(self) -> bytes:
        return self.header + self.iv + self.ciphertext

    def to_bytes(self) -> bytes:
        return self.authenticated_bytes + self.tag

    @classmethod
    def from_bytes(cls, raw: bytes) -> EncryptedRecord:
        if len(raw) != RECORD_LEN:
            raise CorruptEntry(f"record must be {RECORD_LEN} bytes, got {len(raw)}")
        sid, seq = struct.unpack_from("<II", raw)
        return cls(sid, seq, raw[8:24], raw[24 : 24 + PADDED_LEN], raw[24 + PADDED_LEN :])


class SecurityModule:
    """Key slots and crypto services of the cell-control board (SHE-style).

    With ``enabled=False`` records pass through unencrypted and untagged.
    """

    def __init__(self, clock: SimClock | None = None, iv_seed: int | None = None, enabled: bool = True):
        self.clock = clock
        self.enabled = enabled
        self._keys: SessionKeys | None = None
        self._iv_rng = random.Random(iv_seed) if iv_seed is not None else None

    @property
    def keys(self) -> SessionKeys:
        if self._keys is None:
            raise NoSessionKey("no session key inserted")
        return self._keys

    @property
    def inserted(self) -> bool:
        return self._keys is not None

    def insert_keys(self, keys: SessionKeys) -> None:
        if self._keys is not None:
            raise AlreadyInserted("session keys already inserted for this session")
        self._keys = keys
        if self.clock is not None:
            self.clock.charge("key_insertion", component="bms")

    def _fresh_iv(self) -> bytes:
        return self._iv_rng.randbytes(16) if self._iv_rng is not None else os.urandom(16)

    def encrypt_record(self, padded: bytes, sequence: int) -> EncryptedRecord:
        if len(padded) != PADDED_LEN:
            raise BadLength(f"padded sample must be {PADDED_LEN} bytes")
        if not self.enabled:
            sid = self._keys.session_id if self._keys else 0
            return EncryptedRecord(sid, sequence, bytes(16), bytes(padded), bytes(16))
        keys = self.keys
        iv = self._fresh_iv()
        ct = cbc_encrypt(keys.enc_key, iv, padded)
        aad = struct.pack("<II", keys.session_id, sequence) + iv + ct
        rec = EncryptedRecord(keys.session_id, sequence, iv, ct, cmac_tag(keys.mac_key, aad))
        if self.clock is not None:
            self.clock.charge("security_ops", component="bms")
        return rec

    def verify_and_decrypt(self, rec: EncryptedRecord) -> bytes:
        """Check the tag first, then decrypt and strip padding."""
        keys = self.keys
        expected = cmac_tag(keys.mac_key, rec.authenticated_bytes)
        if not hmac.compare_digest(expected, rec.tag):
            raise IntegrityFailure(f"record {rec.sequence}: CMAC mismatch")
        return unpad(cbc_decrypt(keys.enc_key, rec.iv, rec.ciphertext))


# -- append-only store ------------------------------------------------------


class ScanOutcome(enum.Enum):
    OK = "ok"
    INTEGRITY_FAILURE = "integrity_failure"
    PADDING_ERROR = "padding_error"
    UNVERIFIED = "unverified"
    CORRUPT = "corrupt"


@dataclass(frozen=True)
class ScanEntry:
    index: int
    record: EncryptedRecord | None
    outcome: ScanOutcome
    sample: bytes | None = None
    missing_before: tuple[int, ...] = ()


class LogStore:
    def __init__(self, path: str | Path, capacity: int | None = None, protected: bool = True):
        self.path = Path(path)
        self.capacity = capacity
        if self.path.exists() and self.path.stat().st_size > 0:
            self.protected = self._read_header()
        else:
            self.protected = protected
            self.path.write_bytes(MAGIC + bytes([VERSION, FLAG_PROTECTED if protected else 0]))

    def _read_header(self) -> bool:
        with self.path.open("rb") as fh:
            head = fh.read(HEADER_LEN)
        if len(head) != HEADER_LEN or head[:6] != MAGIC:
            raise CorruptEntry(f"{self.path}: not a sample log (bad magic)")
        if head[6] != VERSION:
            raise CorruptEntry(f"{self.path}: unsupported log version {head[6]}")
        return bool(head[7] & FLAG_PROTECTED)

    def __len__(self) -> int:
        return (self.path.stat().st_size - HEADER_LEN) // RECORD_LEN

    def append(self, rec: EncryptedRecord) -> None:
        if self.capacity is not None and len(self) >= self.capacity:
            raise StorageFull(f"log holds its capacity of {self.capacity} records")
        with self.path.open("ab") as fh:
            fh.write(rec.to_bytes())

    def records(self) -> Iterator[EncryptedRecord | None]:
        data = self.path.read_bytes()[HEADER_LEN:]
        for off in range(0, len(data), RECORD_LEN):
            chunk = data[off : off + RECORD_LEN]
            yield EncryptedRecord.from_bytes(chunk) if len(chunk) == RECORD_LEN else None

    def scan(self, hsm: SecurityModule | None = None) -> Iterator[ScanEntry]:
        """Verify every record and report sequence numbers missing before it."""
        expected = 0
        for index, rec in enumerate(self.records()):
            if rec is None:
                yield ScanEntry(index, None, ScanOutcome.CORRUPT)
                return
            sample = None
            if not self.protected or hsm is None:
                outcome = ScanOutcome.UNVERIFIED
            else:
                try:
                    sample = hsm.verify_and_decrypt(rec)
                    outcome = ScanOutcome.OK
                except IntegrityFailure:
                    outcome = ScanOutcome.INTEGRITY_FAILURE
                except PaddingError:
                    outcome = ScanOutcome.PADDING_ERROR
            trusted = outcome in (ScanOutcome.OK, ScanOutcome.UNVERIFIED)
            missing: tuple[int, ...] = ()
            if trusted and rec.sequence > expected:
                missing = tuple(range(expected, rec.sequence))
            if not self.protected:
                sample = unpad_or_none(rec.ciphertext)
            yield ScanEntry(index, rec, outcome, sample, missing)
            expected = rec.sequence + 1 if trusted else expected + 1


def unpad_or_none(data: bytes) -> bytes | None:
    try:
        return unpad(data)
    except PaddingError:
        return None


def log_append(store: LogStore, rec: EncryptedRecord) -> None:
    store.append(rec)


def log_scan(store: LogStore, hsm: SecurityModule | None = None) -> Iterator[ScanEntry]:
    return store.scan(hsm)
