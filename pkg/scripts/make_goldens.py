"""Regenerate tests/golden/*.json.

Frame bytes are built here with plain struct packing and a bitwise CRC, not
with the package codec, so the goldens act as an independent reference.
The corruption golden replays the channel's RNG draw order directly.
"""

import json
import random
import struct
from pathlib import Path

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"

CORRUPT_SEED = 20240501
CORRUPT_P = 0.5
CORRUPT_N = 100


def crc_x25(data: bytes) -> int:
    crc = 0xFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ 0x8408 if crc & 1 else crc >> 1
    return crc ^ 0xFFFF


def with_crc(body: bytes) -> bytes:
    return body + struct.pack("<H", crc_x25(body))


def hexdump(b: bytes) -> str:
    return " ".join(f"{x:02X}" for x in b)


def frames() -> dict:
    uid = bytes.fromhex("e004015012345678")
    cases = {
        # flags, cmd, [uid], block_address u16, block_count u8, payload
        "read_signature_addressed": with_crc(struct.pack("<BB", 0x01, 0xBD) + uid + struct.pack("<HB", 0, 0)),
        "energy_status_unaddressed": with_crc(struct.pack("<BBHB", 0x00, 0xC2, 0, 0)),
        "sram_read_2_blocks": with_crc(struct.pack("<BB", 0x01, 0xD2) + uid + struct.pack("<HB", 0, 2)),
        "i2c_write_measure": with_crc(struct.pack("<BB", 0x01, 0xD4) + uid + struct.pack("<HB", 0, 2) + bytes([0x00, 0x2E])),
        "sram_write_block_5": with_crc(struct.pack("<BBHB", 0x00, 0xD3, 5, 1) + b"\xde\xad\xbe\xef"),
        "response_ok_temp": with_crc(bytes([0x00]) + bytes([0x09, 0xF6, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00])),
        "response_empty": with_crc(bytes([0x00])),
        "response_error_not_powered": with_crc(bytes([0x01, 0x01])),
    }
    return {k: hexdump(v) for k, v in cases.items()}


def corrupt_positions() -> dict:
    # per transceive: u_drop, u_corrupt, 16 random bits for the position
    rng = random.Random(CORRUPT_SEED)
    events = []
    for i in range(CORRUPT_N):
        rng.random()
        u_corrupt = rng.random()
        bits = rng.getrandbits(16)
        if u_corrupt < CORRUPT_P:
            events.append({"index": i, "bits": bits})
    return {"seed": CORRUPT_SEED, "corrupt_probability": CORRUPT_P, "transceives": CORRUPT_N, "events": events}


def main() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    (GOLDEN / "frames.json").write_text(json.dumps(frames(), indent=2, sort_keys=True) + "\n")
    (GOLDEN / "corrupt_positions.json").write_text(json.dumps(corrupt_positions(), indent=2) + "\n")
    print(f"wrote goldens to {GOLDEN}")


if __name__ == "__main__":
    main()
