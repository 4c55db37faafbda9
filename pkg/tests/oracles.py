"""Independent reference implementations used only by the tests.

Deliberately naive: bitwise CRC, textbook AES with a computed S-box,
CMAC straight from its definition, affine double-and-add.
"""

from __future__ import annotations

# -- CRC-16/X-25 ---------------------------------------------------------------


def crc_x25(data: bytes) -> int:
    crc = 0xFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ 0x8408 if crc & 1 else crc >> 1
    return crc ^ 0xFFFF


# -- AES-128 -------------------------------------------------------------------


def _xtime(a: int) -> int:
    a <<= 1
    return (a ^ 0x11B) & 0xFF if a & 0x100 else a


def _gmul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a = _xtime(a)
        b >>= 1
    return out


def _sbox() -> list[int]:
    box = []
    for x in range(256):
        inv = 0
        if x:
            inv = next(y for y in range(1, 256) if _gmul(x, y) == 1)
        s = inv
        for i in range(1, 5):
            s ^= ((inv << i) | (inv >> (8 - i))) & 0xFF
        box.append(s ^ 0x63)
    return box


SBOX = _sbox()
INV_SBOX = [SBOX.index(i) for i in range(256)]


def _expand(key: bytes) -> list[list[int]]:
    words = [list(key[i : i + 4]) for i in range(0, 16, 4)]
    rcon = 1
    for i in range(4, 44):
        t = list(words[i - 1])
        if i % 4 == 0:
            t = [SBOX[b] for b in t[1:] + t[:1]]
            t[0] ^= rcon
            rcon = _xtime(rcon)
        words.append([a ^ b for a, b in zip(words[i - 4], t)])
    return [sum(words[r * 4 : r * 4 + 4], []) for r in range(11)]


def _shift(state: list[int], inverse: bool = False) -> list[int]:
    # state is column-major: index = col*4 + row
    out = [0] * 16
    for c in range(4):
        for r in range(4):
            src = (c + r) % 4 if not inverse else (c - r) % 4
            out[c * 4 + r] = state[src * 4 + r]
    return out


def _mix(state: list[int], m: tuple[int, int, int, int]) -> list[int]:
    out = []
    for c in range(4):
        col = state[c * 4 : c * 4 + 4]
        for r in range(4):
            v = 0
            for k in range(4):
                v ^= _gmul(m[(k - r) % 4], col[k])
            out.append(v)
    return out


def aes_encrypt_block(key: bytes, block: bytes) -> bytes:
    rk = _expand(key)
    s = [b ^ k for b, k in zip(block, rk[0])]
    for rnd in range(1, 11):
        s = _shift([SBOX[b] for b in s])
        if rnd != 10:
            s = _mix(s, (2, 3, 1, 1))
        s = [b ^ k for b, k in zip(s, rk[rnd])]
    return bytes(s)


def aes_decrypt_block(key: bytes, block: bytes) -> bytes:
    rk = _expand(key)
    s = [b ^ k for b, k in zip(block, rk[10])]
    for rnd in range(9, -1, -1):
        s = [INV_SBOX[b] for b in _shift(s, inverse=True)]
        s = [b ^ k for b, k in zip(s, rk[rnd])]
        if rnd:
            s = _mix(s, (14, 11, 13, 9))
    return bytes(s)


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def cbc_encrypt(key: bytes, iv: bytes, data: bytes) -> bytes:
    out, prev = b"", iv
    for i in range(0, len(data), 16):
        prev = aes_encrypt_block(key, _xor(data[i : i + 16], prev))
        out += prev
    return out


def cbc_decrypt(key: bytes, iv: bytes, data: bytes) -> bytes:
    out, prev = b"", iv
    for i in range(0, len(data), 16):
        blk = data[i : i + 16]
        out += _xor(aes_decrypt_block(key, blk), prev)
        prev = blk
    return out


def _dbl(block: bytes) -> bytes:
    v = int.from_bytes(block, "big") << 1
    if v >> 128:
        v = (v & ((1 << 128) - 1)) ^ 0x87
    return v.to_bytes(16, "big")


def cmac(key: bytes, msg: bytes) -> bytes:
    l = aes_encrypt_block(key, bytes(16))
    k1 = _dbl(l)
    k2 = _dbl(k1)
    blocks = [msg[i : i + 16] for i in range(0, len(msg), 16)] or [b""]
    last = blocks[-1]
    if len(last) == 16:
        last = _xor(last, k1)
    else:
        last = _xor(last + b"\x80" + bytes(15 - len(last)), k2)
    x = bytes(16)
    for blk in blocks[:-1]:
        x = aes_encrypt_block(key, _xor(x, blk))
    return aes_encrypt_block(key, _xor(x, last))


# -- secp128r1 affine reference --------------------------------------------------

P = 0xFFFFFFFDFFFFFFFFFFFFFFFFFFFFFFFF
A = 0xFFFFFFFDFFFFFFFFFFFFFFFFFFFFFFFC
B = 0xE87579C11079F43DD824993C2CEE5ED3
N = 0xFFFFFFFE0000000075A30D1B9038A115
G = (0x161FF7528B899B2D0C28607CA52C5B86, 0xCF5AC8395BAFEB13C02DA292DDED7A83)


def ec_add(p1, p2):
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    if p1[0] == p2[0] and (p1[1] + p2[1]) % P == 0:
        return None
    if p1 == p2:
        lam = (3 * p1[0] * p1[0] + A) * pow(2 * p1[1], -1, P) % P
    else:
        lam = (p2[1] - p1[1]) * pow(p2[0] - p1[0], -1, P) % P
    x = (lam * lam - p1[0] - p2[0]) % P
    return x, (lam * (p1[0] - x) - p1[1]) % P


def ec_mul(k: int, pt=G):
    acc = None
    for bit in bin(k)[2:]:
        acc = ec_add(acc, acc)
        if bit == "1":
            acc = ec_add(acc, pt)
    return acc
