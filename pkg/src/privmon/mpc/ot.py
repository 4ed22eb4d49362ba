"""Batched 1-out-of-2 base OT in the style of Chou and Orlandi's "simplest OT".

The group is the order-q subgroup of quadratic residues modulo the 2048-bit
MODP safe prime of RFC 3526 (p = 2q + 1), generated by 4.

    sender                         chooser (bit b)
    a <- Z_q, A = g^a    --A-->
                         <--B--    r <- Z_q, B = g^r   (b = 0)
                                             B = A g^r (b = 1)
    k0 = KDF(B^a)
    k1 = KDF((B/A)^a)    --e0, e1-->   m_b = e_b ^ KDF(A^r)

Exponents are 320 bits, following the RFC's guidance on exponent size for
this group.
"""
from __future__ import annotations

import hashlib
import secrets
from typing import Sequence

import gmpy2

P = gmpy2.mpz(int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF", 16))
Q = (P - 1) // 2
G = gmpy2.mpz(4)
ELEMENT_BYTES = 256
EXPONENT_BITS = 320
_KDF_PREFIX = b"privmon-ot/v1"


class OTError(ValueError):
    pass


def _exponent() -> gmpy2.mpz:
    while True:
        e = gmpy2.mpz(secrets.randbits(EXPONENT_BITS))
        if e:
            return e


def encode_element(x) -> bytes:
    return int(x).to_bytes(ELEMENT_BYTES, "big")


def decode_element(data: bytes) -> gmpy2.mpz:
    """Parse and check membership in the prime-order subgroup."""
    if len(data) != ELEMENT_BYTES:
        raise OTError(f"group element must be {ELEMENT_BYTES} bytes")
    x = gmpy2.mpz(int.from_bytes(data, "big"))
    if not 1 < x < P - 1 or gmpy2.jacobi(x, P) != 1:
        raise OTError("value is not in the quadratic-residue subgroup")
    return x


def _kdf(index: int, A: bytes, B: bytes, shared, length: int) -> bytes:
    h = hashlib.shake_256()
    h.update(_KDF_PREFIX + index.to_bytes(8, "big") + A + B + encode_element(shared))
    return h.digest(length)


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


class OTSender:
    def __init__(self, pairs: Sequence[tuple[bytes, bytes]]):
        lengths = {len(m) for pair in pairs for m in pair}
        if len(lengths) > 1:
            raise OTError("all OT messages must share one length")
        self.pairs = list(pairs)
        self.msg_len = lengths.pop() if lengths else 0
        self._a = _exponent()
        self._A = gmpy2.powmod(G, self._a, P)
        self._A_bytes = encode_element(self._A)

    def first_message(self) -> bytes:
        return self._A_bytes

    def answer(self, choice_message: bytes) -> bytes:
        n = len(self.pairs)
        if len(choice_message) != n * ELEMENT_BYTES:
            raise OTError(f"expected {n} chooser elements")
        A_a_inv = gmpy2.invert(gmpy2.powmod(self._A, self._a, P), P)
        out = bytearray()
        for k, (m0, m1) in enumerate(self.pairs):
            raw = choice_message[k * ELEMENT_BYTES:(k + 1) * ELEMENT_BYTES]
            B = decode_element(raw)
            s0 = gmpy2.powmod(B, self._a, P)
            s1 = s0 * A_a_inv % P
            out += _xor(m0, _kdf(k, self._A_bytes, raw, s0, self.msg_len))
            out += _xor(m1, _kdf(k, self._A_bytes, raw, s1, self.msg_len))
        return bytes(out)


class OTChooser:
    def __init__(self, choices: Sequence[int], msg_len: int):
        if any(b not in (0, 1) for b in choices):
            raise OTError("choice bits must be 0 or 1")
        self.choices = [int(b) for b in choices]
        self.msg_len = msg_len
        self._secrets: list = []
        self._sent: list[bytes] = []
        self._A_bytes = b""
        self._A = None

    def choose(self, first_message: bytes) -> bytes:
        self._A = decode_element(first_message)
        self._A_bytes = first_message
        out = bytearray()
        for b in self.choices:
            r = _exponent()
            B = gmpy2.powmod(G, r, P)
            if b:
                B = B * self._A % P
            enc = encode_element(B)
            self._secrets.append(r)
            self._sent.append(enc)
            out += enc
        return bytes(out)

    def receive(self, answer: bytes) -> list[bytes]:
        n, L = len(self.choices), self.msg_len
        if self._A is None:
            raise OTError("choose() must run before receive()")
        if len(answer) != 2 * n * L:
            raise OTError(f"expected {2 * n * L} answer bytes, got {len(answer)}")
        result = []
        for k, (b, r) in enumerate(zip(self.choices, self._secrets)):
            e = answer[(2 * k + b) * L:(2 * k + b + 1) * L]
            shared = gmpy2.powmod(self._A, r, P)
            result.append(_xor(e, _kdf(k, self._A_bytes, self._sent[k], shared, L)))
        return result


def ot_transfer(pairs: Sequence[tuple[bytes, bytes]], choices: Sequence[int]) -> list[bytes]:
    """Run both roles in memory; the chooser's outputs are returned."""
    if len(pairs) != len(choices):
        raise OTError("one choice bit per message pair")
    sender = OTSender(pairs)
    chooser = OTChooser(choices, sender.msg_len)
    msg2 = chooser.choose(sender.first_message())
    return chooser.receive(sender.answer(msg2))
