"""Tweakable hash H(A, B, tweak) for garbled-table rows, evaluated in batches.

kappa = 128: fixed-key AES in the "MMO with doubling" shape,
    X = 2A ^ 4B ^ tweak,  H = AES_K(X) ^ X
where doubling is multiplication by x in GF(2^128) (reduction 0x87). The
AES calls go through `cryptography` one batch at a time.

kappa = 256: SHA-256 over  prefix || A || B || tweak (big-endian, 8 bytes),
compiled with numba because there is no batched SHA-256 in the stdlib.

Labels are rows of little-endian uint64 words; the byte form of a label is
those words in order, each little-endian.
"""
from __future__ import annotations

import hashlib

import numba
import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

HASH_PREFIX = b"privmon-gc-h/v1\x00"  # 16 bytes, SHA-256 domain separation
FIXED_AES_KEY = hashlib.sha256(b"privmon fixed-key aes").digest()[:16]

_ECB = Cipher(algorithms.AES(FIXED_AES_KEY), modes.ECB()).encryptor()


def aes_blocks(x: np.ndarray) -> np.ndarray:
    """AES_K on every row of an (n, 2) uint64 array."""
    data = np.ascontiguousarray(x, dtype="<u8").tobytes()
    return np.frombuffer(_ECB.update(data), dtype="<u8").reshape(-1, 2)


@numba.njit(cache=True, inline="always")
def mmo_input(a_lo, a_hi, b_lo, b_hi, tweak):
    """(2A ^ 4B ^ tweak) as a (lo, hi) pair."""
    one = np.uint64(1)
    s63 = np.uint64(63)
    red = np.uint64(0x87)
    x_hi = (a_hi << one) | (a_lo >> s63)
    x_lo = (a_lo << one) ^ ((a_hi >> s63) * red)
    for _ in range(2):
        c = b_hi >> s63
        b_hi = (b_hi << one) | (b_lo >> s63)
        b_lo = (b_lo << one) ^ (c * red)
    return x_lo ^ b_lo ^ tweak, x_hi ^ b_hi


# -- SHA-256 -------------------------------------------------------------------

SHA_K = np.array([
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
], dtype=np.int64)
SHA_H0 = np.array([0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                   0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19], dtype=np.int64)
PREFIX_WORDS = np.array([int.from_bytes(HASH_PREFIX[i : i + 4], "big") for i in range(0, 16, 4)],
                        dtype=np.int64)


@numba.njit(cache=True, inline="always")
def _bswap32(x):
    x = np.int64(x)
    return ((x & 0xFF) << 24) | ((x & 0xFF00) << 8) | ((x >> 8) & 0xFF00) | ((x >> 24) & 0xFF)


@numba.njit(cache=True, inline="always")
def _rotr(x, n):
    return ((x >> n) | (x << (32 - n))) & 0xFFFFFFFF


@numba.njit(cache=True)
def _compress(state, block, w):
    for t in range(16):
        w[t] = block[t]
    for t in range(16, 64):
        x = w[t - 15]
        y = w[t - 2]
        s0 = _rotr(x, 7) ^ _rotr(x, 18) ^ (x >> 3)
        s1 = _rotr(y, 17) ^ _rotr(y, 19) ^ (y >> 10)
        w[t] = (w[t - 16] + s0 + w[t - 7] + s1) & 0xFFFFFFFF
    a, b, c, d = state[0], state[1], state[2], state[3]
    e, f, g, h = state[4], state[5], state[6], state[7]
    for t in range(64):
        S1 = _rotr(e, 6) ^ _rotr(e, 11) ^ _rotr(e, 25)
        ch = (e & f) ^ ((~e) & g)
        t1 = (h + S1 + ch + SHA_K[t] + w[t]) & 0xFFFFFFFF
        S0 = _rotr(a, 2) ^ _rotr(a, 13) ^ _rotr(a, 22)
        mj = (a & b) ^ (a & c) ^ (b & c)
        h, g, f, e = g, f, e, (d + t1) & 0xFFFFFFFF
        d, c, b, a = c, b, a, (t1 + S0 + mj) & 0xFFFFFFFF
    state[0] = (state[0] + a) & 0xFFFFFFFF
    state[1] = (state[1] + b) & 0xFFFFFFFF
    state[2] = (state[2] + c) & 0xFFFFFFFF
    state[3] = (state[3] + d) & 0xFFFFFFFF
    state[4] = (state[4] + e) & 0xFFFFFFFF
    state[5] = (state[5] + f) & 0xFFFFFFFF
    state[6] = (state[6] + g) & 0xFFFFFFFF
    state[7] = (state[7] + h) & 0xFFFFFFFF


@numba.njit(cache=True)
def sha_rows(a, b, tweaks, out):
    """out[k] = SHA-256(prefix || a[k] || b[k] || tweaks[k]) for 256-bit labels."""
    msg = np.zeros(32, np.int64)  # two blocks: 88-byte message + padding
    w = np.empty(64, np.int64)
    state = np.empty(8, np.int64)
    m32 = np.uint64(0xFFFFFFFF)
    s32 = np.uint64(32)
    for k in range(a.shape[0]):
        for i in range(4):
            msg[i] = PREFIX_WORDS[i]
        for i in range(4):
            msg[4 + 2 * i] = _bswap32(a[k, i] & m32)
            msg[5 + 2 * i] = _bswap32(a[k, i] >> s32)
            msg[12 + 2 * i] = _bswap32(b[k, i] & m32)
            msg[13 + 2 * i] = _bswap32(b[k, i] >> s32)
        msg[20] = np.int64(tweaks[k] >> s32)
        msg[21] = np.int64(tweaks[k] & m32)
        msg[22] = 0x80000000
        msg[31] = 88 * 8
        for i in range(8):
            state[i] = SHA_H0[i]
        _compress(state, msg[:16], w)
        _compress(state, msg[16:], w)
        for i in range(4):
            lo = np.uint64(_bswap32(state[2 * i]))
            hi = np.uint64(_bswap32(state[2 * i + 1]))
            out[k, i] = lo | (hi << s32)


# -- single-call forms (tests, reference checks) -------------------------------

def H(a: bytes, b: bytes, tweak: int) -> bytes:
    """The row hash on byte labels, through the same code paths as the garbler;
    the label length selects kappa."""
    if len(a) != len(b) or len(a) not in (16, 32):
        raise ValueError("labels must both be 16 or 32 bytes")
    wa = np.frombuffer(a, dtype="<u8").astype(np.uint64)
    wb = np.frombuffer(b, dtype="<u8").astype(np.uint64)
    t = np.uint64(tweak)
    if len(a) == 16:
        x = np.array([mmo_input(wa[0], wa[1], wb[0], wb[1], t)], dtype=np.uint64)
        return (aes_blocks(x) ^ x).astype("<u8").tobytes()
    out = np.zeros((1, 4), dtype=np.uint64)
    sha_rows(wa.reshape(1, 4), wb.reshape(1, 4), np.array([t]), out)
    return out.astype("<u8").tobytes()


def H_reference(a: bytes, b: bytes, tweak: int) -> bytes:
    """Same function written with Python integers and library primitives."""
    if len(a) == 32:
        return hashlib.sha256(HASH_PREFIX + a + b + tweak.to_bytes(8, "big")).digest()

    def dbl(x: int) -> int:
        x <<= 1
        return (x ^ 0x87) & ((1 << 128) - 1) if x >> 128 else x

    x = dbl(int.from_bytes(a, "little")) ^ dbl(dbl(int.from_bytes(b, "little"))) ^ tweak
    xbytes = x.to_bytes(16, "little")
    enc = Cipher(algorithms.AES(FIXED_AES_KEY), modes.ECB()).encryptor()
    y = enc.update(xbytes) + enc.finalize()
    return bytes(p ^ q for p, q in zip(y, xbytes))
