"""secp128r1 arithmetic and ECDSA with deterministic (RFC 6979) nonces.

Points are affine ``(x, y)`` tuples with ``None`` for the point at infinity.
Scalar multiplication runs in Jacobian coordinates with a fixed 4-bit
window; the affine group law is kept for encoding and for small additions.

Message digest: SHA-256, truncated to the bit length of the group order.
Signatures encode as fixed-width big-endian ``r || s`` (16 + 16 bytes).
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass


@dataclass(frozen=True)
class CurveParams:
    name: str
    p: int
    a: int
    b: int
    gx: int
    gy: int
    n: int
    h: int

    @property
    def g(self) -> tuple[int, int]:
        return (self.gx, self.gy)

    @property
    def byte_len(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def order_bits(self) -> int:
        return self.n.bit_length()


SECP128R1 = CurveParams(
    name="secp128r1",
    p=0xFFFFFFFDFFFFFFFFFFFFFFFFFFFFFFFF,
    a=0xFFFFFFFDFFFFFFFFFFFFFFFFFFFFFFFC,
    b=0xE87579C11079F43DD824993C2CEE5ED3,
    gx=0x161FF7528B899B2D0C28607CA52C5B86,
    gy=0xCF5AC8395BAFEB13C02DA292DDED7A83,
    n=0xFFFFFFFE0000000075A30D1B9038A115,
    h=1,
)


class InvalidKey(ValueError):
    pass


class OffCurvePoint(ValueError):
    pass


# -- prime field ------------------------------------------------------------


def fadd(x: int, y: int, p: int = SECP128R1.p) -> int:
    return (x + y) % p


def fsub(x: int, y: int, p: int = SECP128R1.p) -> int:
    return (x - y) % p


def fmul(x: int, y: int, p: int = SECP128R1.p) -> int:
    return (x * y) % p


def finv(x: int, p: int = SECP128R1.p) -> int:
    if x % p == 0:
        raise ZeroDivisionError("inverse of zero")
    return pow(x, -1, p)


# -- affine group law -------------------------------------------------------


def is_on_curve(pt, curve: CurveParams = SECP128R1) -> bool:
    if pt is None:
        return True
    x, y = pt
    if not (0 <= x < curve.p and 0 <= y < curve.p):
        return False
    return (y * y - (x * x * x + curve.a * x + curve.b)) % curve.p == 0


def point_neg(pt, curve: CurveParams = SECP128R1):
    if pt is None:
        return None
    return (pt[0], (-pt[1]) % curve.p)


def point_add(p1, p2, curve: CurveParams = SECP128R1):
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    p = curve.p
    x1, y1 = p1
    x2, y2 = p2
    if x1 == x2:
        if (y1 + y2) % p == 0:
            return None
        lam = (3 * x1 * x1 + curve.a) * pow(2 * y1, -1, p) % p
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, p) % p
    x3 = (lam * lam - x1 - x2) % p
    return (x3, (lam * (x1 - x3) - y1) % p)


# -- Jacobian arithmetic for scalar multiplication -------------------------


def _jdouble(P, curve):
    X, Y, Z = P
    if Y == 0 or Z == 0:
        return (1, 1, 0)
    p = curve.p
    YY = Y * Y % p
    S = 4 * X * YY % p
    ZZ = Z * Z % p
    M = (3 * X * X + curve.a * ZZ * ZZ) % p
    X3 = (M * M - 2 * S) % p
    Y3 = (M * (S - X3) - 8 * YY * YY) % p
    Z3 = 2 * Y * Z % p
    return (X3, Y3, Z3)


def _jadd(P, Q, curve):
    if P[2] == 0:
        return Q
    if Q[2] == 0:
        return P
    p = curve.p
    X1, Y1, Z1 = P
    X2, Y2, Z2 = Q
    Z1Z1 = Z1 * Z1 % p
    Z2Z2 = Z2 * Z2 % p
    U1 = X1 * Z2Z2 % p
    U2 = X2 * Z1Z1 % p
    S1 = Y1 * Z2 * Z2Z2 % p
    S2 = Y2 * Z1 * Z1Z1 % p
    if U1 == U2:
        if S1 != S2:
            return (1, 1, 0)
        return _jdouble(P, curve)
    H = (U2 - U1) % p
    R = (S2 - S1) % p
    HH = H * H % p
    HHH = H * HH % p
    V = U1 * HH % p
    X3 = (R * R - HHH - 2 * V) % p
    Y3 = (R * (V - X3) - S1 * HHH) % p
    Z3 = H * Z1 * Z2 % p
    return (X3, Y3, Z3)


def _to_affine(P, curve):
    X, Y, Z = P
    if Z == 0:
        return None
    p = curve.p
    zi = pow(Z, -1, p)
    zi2 = zi * zi % p
    return (X * zi2 % p, Y * zi2 * zi % p)


def scalar_mult(k: int, pt, curve: CurveParams = SECP128R1):
    """Return ``k * pt`` (4-bit fixed window, Jacobian coordinates)."""
    if pt is None:
        return None
    if k < 0:
        return scalar_mult(-k, point_neg(pt, curve), curve)
    if k == 0:
        return None
    base = (pt[0], pt[1], 1)
    table = [(1, 1, 0), base]
    for _ in range(14):
        table.append(_jadd(table[-1], base, curve))
    acc = (1, 1, 0)
    for shift in range(((k.bit_length() + 3) // 4 - 1) * 4, -1, -4):
        for _ in range(4):
            acc = _jdouble(acc, curve)
        nibble = (k >> shift) & 0xF
        if nibble:
            acc = _jadd(acc, table[nibble], curve)
    return _to_affine(acc, curve)


# -- keys & encoding ----------------------------------------------------------


def public_key(private_key: int, curve: CurveParams = SECP128R1):
    check_private_key(private_key, curve)
    return scalar_mult(private_key, curve.g, curve)


def check_private_key(d: int, curve: CurveParams = SECP128R1) -> None:
    if not 1 <= d < curve.n:
        raise InvalidKey("private key must satisfy 1 <= d < n")


def encode_point(pt, curve: CurveParams = SECP128R1) -> bytes:
    """Uncompressed SEC1 encoding: ``04 || X || Y``."""
    if pt is None:
        raise OffCurvePoint("cannot encode the point at infinity")
    L = curve.byte_len
    return b"\x04" + pt[0].to_bytes(L, "big") + pt[1].to_bytes(L, "big")


def decode_point(raw: bytes, curve: CurveParams = SECP128R1):
    L = curve.byte_len
    if len(raw) != 1 + 2 * L or raw[0] != 0x04:
        raise OffCurvePoint("expected an uncompressed point")
    pt = (int.from_bytes(raw[1 : 1 + L], "big"), int.from_bytes(raw[1 + L :], "big"))
    if not is_on_curve(pt, curve):
        raise OffCurvePoint("point does not satisfy the curve equation")
    return pt


@dataclass(frozen=True)
class Signature:
    r: int
    s: int

    def to_bytes(self, curve: CurveParams = SECP128R1) -> bytes:
        L = (curve.order_bits + 7) // 8
        return self.r.to_bytes(L, "big") + self.s.to_bytes(L, "big")

    @classmethod
    def from_bytes(cls, raw: bytes, curve: CurveParams = SECP128R1) -> Signature:
        L = (curve.order_bits + 7) // 8
        if len(raw) != 2 * L:
            raise ValueError(f"signature must be {2 * L} bytes")
        return cls(int.from_bytes(raw[:L], "big"), int.from_bytes(raw[L:], "big"))


# -- ECDSA --------------------------------------------------------------------


def _bits2int(data: bytes, qlen: int) -> int:
    v = int.from_bytes(data, "big")
    blen = len(data) * 8
    return v >> (blen - qlen) if blen > qlen else v


def message_digest(message: bytes, curve: CurveParams = SECP128R1) -> int:
    return _bits2int(hashlib.sha256(message).digest(), curve.order_bits)


def rfc6979_nonces(private_key: int, h1: bytes, curve: CurveParams = SECP128R1):
    """Yield candidate nonces per RFC 6979 section 3.2 with HMAC-SHA256."""
    q = curve.n
    qlen = q.bit_length()
    rlen = (qlen + 7) // 8
    x = private_key.to_bytes(rlen, "big")
    h = (_bits2int(h1, qlen) % q).to_bytes(rlen, "big")
    V = b"\x01" * 32
    K = b"\x00" * 32
    K = hmac.new(K, V + b"\x00" + x + h, hashlib.sha256).digest()
    V = hmac.new(K, V, hashlib.sha256).digest()
    K = hmac.new(K, V + b"\x01" + x + h, hashlib.sha256).digest()
    V = hmac.new(K, V, hashlib.sha256).digest()
    while True:
        T = b""
        while len(T) < rlen:
            V = hmac.new(K, V, hashlib.sha256).digest()
            T += V
        k = _bits2int(T[:rlen], qlen)
        if 1 <= k < q:
            yield k
        K = hmac.new(K, V + b"\x00", hashlib.sha256).digest()
        V = hmac.new(K, V, hashlib.sha256).digest()


def sign(private_key: int, message: bytes, curve: CurveParams = SECP128R1) -> Signature:
    check_private_key(private_key, curve)
    n = curve.n
    h1 = hashlib.sha256(message).digest()
    e = _bits2int(h1, curve.order_bits)
    for k in rfc6979_nonces(private_key, h1, curve):
        R = scalar_mult(k, curve.g, curve)
        r = R[0] % n
        if r == 0:
            continue
        s = pow(k, -1, n) * (e + r * private_key) % n
        if s == 0:
            continue
        return Signature(r, s)
    raise AssertionError("unreachable")


def verify(public_key, message: bytes, sig: Signature, curve: CurveParams = SECP128R1) -> bool:
    if public_key is None or not is_on_curve(public_key, curve):
        raise OffCurvePoint("public key is not a point on the curve")
    n = curve.n
    r, s = sig.r, sig.s
    if not (1 <= r < n and 1 <= s < n):
        return False
    e = message_digest(message, curve)
    w = pow(s, -1, n)
    u1 = e * w % n
    u2 = r * w % n
    X = point_add(scalar_mult(u1, curve.g, curve), scalar_mult(u2, public_key, curve), curve)
    if X is None:
        return False
    return X[0] % n == r
