import secrets

import gmpy2
import pytest

from privmon.mpc.ot import (ELEMENT_BYTES, G, P, Q, OTChooser, OTError, OTSender, decode_element,
                            encode_element, ot_transfer)


def test_group_parameters():
    assert P % 8 == 7  # 2 is a residue, so 4 = 2^2 generates the order-q subgroup
    assert gmpy2.is_prime(P) and gmpy2.is_prime(Q)
    assert gmpy2.powmod(G, Q, P) == 1 and G != 1


def test_transfer_recovers_chosen_message():
    pairs = [(secrets.token_bytes(16), secrets.token_bytes(16)) for _ in range(64)]
    choices = [secrets.randbelow(2) for _ in pairs]
    got = ot_transfer(pairs, choices)
    assert got == [p[b] for p, b in zip(pairs, choices)]


def test_other_message_stays_hidden():
    pairs = [(b"\x00" * 16, b"\xff" * 16)] * 8
    sender = OTSender(pairs)
    chooser = OTChooser([0] * 8, 16)
    answer = sender.answer(chooser.choose(sender.first_message()))
    # the unchosen ciphertexts are not the plaintexts and differ from each other
    unchosen = [answer[(2 * k + 1) * 16:(2 * k + 2) * 16] for k in range(8)]
    assert all(u != b"\xff" * 16 for u in unchosen)
    assert len(set(unchosen)) == 8


def test_element_checks():
    with pytest.raises(OTError):
        decode_element(b"\x01" * 10)
    with pytest.raises(OTError):
        decode_element(encode_element(1))
    with pytest.raises(OTError):
        decode_element(encode_element(P - 1))
    non_residue = next(x for x in range(2, 100) if gmpy2.jacobi(x, P) == -1)
    with pytest.raises(OTError):
        decode_element(encode_element(non_residue))
    assert decode_element(encode_element(G)) == G


def test_malformed_messages():
    sender = OTSender([(b"a" * 16, b"b" * 16)])
    with pytest.raises(OTError):
        sender.answer(b"\x00" * (2 * ELEMENT_BYTES))
    chooser = OTChooser([1], 16)
    with pytest.raises(OTError):
        chooser.receive(b"\x00" * 32)
    chooser.choose(sender.first_message())
    with pytest.raises(OTError):
        chooser.receive(b"\x00" * 31)
    with pytest.raises(OTError):
        OTChooser([2], 16)
    with pytest.raises(OTError):
        OTSender([(b"a", b"bb")])
    with pytest.raises(OTError):
        ot_transfer([(b"a", b"b")], [0, 1])
