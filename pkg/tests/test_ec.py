import random

import pytest

from minitls import ec
from minitls.crypto import NamedGroup, SignatureScheme
from minitls.errors import InvalidPoint

# Deterministic-ECDSA known answers (RFC 6979 appendix, P-256 key).
P256_X = 0xC9AFA9D845BA75166B5C215767B1D6934E50C3DB36E89B127B8A622B120F6721
P256_KNOWN = [
    (
        b"sample",
        0xEFD48B2AACB6A8FD1140DD9CD45E81D69D2C877B56AAF991C34D0EA84EAF3716,
        0xF7CB1C942D657C41D436C7A1B6E29F65F3E900DBB9AFF4064DC4AB2F843ACDA8,
    ),
    (
        b"test",
        0xF1ABB023518351CD71D881567B1EA663ED3EFCF6C5132B354F28D3B0B7D38367,
        0x019F4113742A2B14BD25926B49C649155F267E60D3814B4C0CC84250E46F0083,
    ),
]


@pytest.mark.parametrize("message,r,s", P256_KNOWN)
def test_deterministic_ecdsa_published_vectors(message, r, s):
    priv = ec.EcPrivateKey(NamedGroup.SECP256R1, P256_X)
    sig = ec.sign(priv, SignatureScheme.ECDSA_SECP256R1_SHA256, message)
    assert ec.signature_parts(sig) == (r, s)
    assert ec.verify(priv.public_bytes(), SignatureScheme.ECDSA_SECP256R1_SHA256, message, sig)


@pytest.mark.parametrize(
    "group,scheme",
    [
        (NamedGroup.SECP256R1, SignatureScheme.ECDSA_SECP256R1_SHA256),
        (NamedGroup.SECP521R1, SignatureScheme.ECDSA_SECP521R1_SHA512),
    ],
)
def test_sign_is_deterministic_and_verifies(group, scheme):
    priv, pub = ec.keypair(group, random.Random(1234))
    msg = b"handshake transcript stand-in"
    sig1 = ec.sign(priv, scheme, msg)
    sig2 = ec.sign(priv, scheme, msg)
    assert sig1 == sig2
    assert ec.verify(pub, scheme, msg, sig1)


def test_verify_rejects_flipped_message_bit():
    priv, pub = ec.keypair(NamedGroup.SECP256R1, random.Random(5))
    scheme = SignatureScheme.ECDSA_SECP256R1_SHA256
    sig = ec.sign(priv, scheme, b"message")
    assert not ec.verify(pub, scheme, b"messagf", sig)
    assert not ec.verify(pub, scheme, b"message", sig[:-1] + bytes([sig[-1] ^ 1]))
    assert not ec.verify(pub, scheme, b"message", b"")


def test_cross_curve_key_scheme_mismatch():
    priv, _ = ec.keypair(NamedGroup.SECP521R1, random.Random(6))
    with pytest.raises(ValueError):
        ec.sign(priv, SignatureScheme.ECDSA_SECP256R1_SHA256, b"m")


@pytest.mark.parametrize(
    "group,secret_len", [(NamedGroup.SECP256R1, 32), (NamedGroup.SECP521R1, 66)]
)
def test_ecdh_symmetry(group, secret_len):
    rng = random.Random(42)
    for _ in range(100):
        a_priv, a_pub = ec.keypair(group, rng)
        b_priv, b_pub = ec.keypair(group, rng)
        ab = ec.shared_secret(a_priv, b_pub)
        ba = ec.shared_secret(b_priv, a_pub)
        assert ab == ba
        assert len(ab) == secret_len


def test_invalid_points_rejected():
    priv, _ = ec.keypair(NamedGroup.SECP256R1, random.Random(9))
    with pytest.raises(InvalidPoint):
        ec.shared_secret(priv, bytes(65))
    with pytest.raises(InvalidPoint):
        ec.shared_secret(priv, b"\x04" + b"\x01" * 64)
    with pytest.raises(InvalidPoint):
        ec.shared_secret(priv, b"")


def test_public_bytes_are_uncompressed_points():
    _, pub256 = ec.keypair(NamedGroup.SECP256R1, random.Random(10))
    _, pub521 = ec.keypair(NamedGroup.SECP521R1, random.Random(10))
    assert len(pub256) == 65 and pub256[0] == 0x04
    assert len(pub521) == 133 and pub521[0] == 0x04
