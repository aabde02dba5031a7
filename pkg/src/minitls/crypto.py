"""Cipher-suite registry and primitive wrappers.

The protocol core never touches an algorithm directly: everything goes
through the registry defined here, so swapping AEAD/hash backends never
leaks into handshake or record code.  Symmetric primitives are backed by
the OpenSSL bindings; HKDF and the label scheme are implemented here
because the two wire protocols prefix labels differently.
"""

import hashlib
import hmac as _hmac
import struct
from dataclasses import dataclass
from enum import Enum, IntEnum

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.ciphers.aead import AESCCM, AESGCM

from .errors import AuthenticationFailure, LengthOverflow, UnknownSuite


class Protocol(str, Enum):
    TLS = "tls"
    DTLS = "dtls"


class SuiteId(IntEnum):
    AES_128_CCM_SHA256 = 0x1304
    AES_256_GCM_SHA384 = 0x1302
    # Not an IANA assignment: 256-bit CCM paired with SHA-384, registered
    # here so 256-bit CCM configurations are expressible.
    AES_256_CCM_SHA384 = 0x13A4


class AeadAlg(IntEnum):
    AES_CCM = 1
    AES_GCM = 2


class HashAlg(IntEnum):
    SHA256 = 1
    SHA384 = 2


_HASH_NAMES = {HashAlg.SHA256: "sha256", HashAlg.SHA384: "sha384"}


@dataclass(frozen=True)
class SuiteParams:
    suite: SuiteId
    key_len: int
    iv_len: int
    tag_len: int
    hash_len: int
    aead_alg: AeadAlg
    hash_alg: HashAlg


_REGISTRY = {
    SuiteId.AES_128_CCM_SHA256: SuiteParams(
        SuiteId.AES_128_CCM_SHA256, 16, 12, 16, 32, AeadAlg.AES_CCM, HashAlg.SHA256
    ),
    SuiteId.AES_256_GCM_SHA384: SuiteParams(
        SuiteId.AES_256_GCM_SHA384, 32, 12, 16, 48, AeadAlg.AES_GCM, HashAlg.SHA384
    ),
    SuiteId.AES_256_CCM_SHA384: SuiteParams(
        SuiteId.AES_256_CCM_SHA384, 32, 12, 16, 48, AeadAlg.AES_CCM, HashAlg.SHA384
    ),
}


def suite_params(suite_id: int) -> SuiteParams:
    """Look up the registry entry for a 16-bit suite code."""
    try:
        return _REGISTRY[SuiteId(suite_id)]
    except (ValueError, KeyError):
        raise UnknownSuite(f"no such cipher suite: 0x{suite_id:04x}") from None


class NamedGroup(IntEnum):
    SECP256R1 = 0x0017
    SECP521R1 = 0x0019


# Uncompressed point: 0x04 || X || Y, i.e. 2 * field_len + 1.
GROUP_PUBKEY_LEN = {NamedGroup.SECP256R1: 65, NamedGroup.SECP521R1: 133}
GROUP_FIELD_LEN = {NamedGroup.SECP256R1: 32, NamedGroup.SECP521R1: 66}


class SignatureScheme(IntEnum):
    ECDSA_SECP256R1_SHA256 = 0x0403
    ECDSA_SECP521R1_SHA512 = 0x0603


# --- hash / HMAC -----------------------------------------------------------


def hash_new(alg: HashAlg):
    return hashlib.new(_HASH_NAMES[alg])


def hash_data(alg: HashAlg, data: bytes) -> bytes:
    return hashlib.new(_HASH_NAMES[alg], data).digest()


def hash_len(alg: HashAlg) -> int:
    return hashlib.new(_HASH_NAMES[alg]).digest_size


def hmac_digest(alg: HashAlg, key: bytes, data: bytes) -> bytes:
    return _hmac.new(key, data, _HASH_NAMES[alg]).digest()


def hmac_verify(alg: HashAlg, key: bytes, data: bytes, mac: bytes) -> bool:
    return _hmac.compare_digest(hmac_digest(alg, key, data), mac)


# --- HKDF ------------------------------------------------------------------


def hkdf_extract(salt: bytes, ikm: bytes, alg: HashAlg) -> bytes:
    """HKDF-Extract; an empty salt means a hash-length run of zero bytes."""
    if not salt:
        salt = bytes(hash_len(alg))
    return hmac_digest(alg, salt, ikm)


def hkdf_expand(prk: bytes, info: bytes, out_len: int, alg: HashAlg) -> bytes:
    n = hash_len(alg)
    if out_len > 255 * n:
        raise LengthOverflow(f"HKDF-Expand output {out_len} exceeds 255*{n}")
    out = b""
    block = b""
    counter = 1
    while len(out) < out_len:
        block = hmac_digest(alg, prk, block + info + bytes([counter]))
        out += block
        counter += 1
    return out[:out_len]


LABEL_PREFIX = {Protocol.TLS: b"tls13 ", Protocol.DTLS: b"dtls13"}


def hkdf_label(label: bytes, context: bytes, out_len: int, protocol: Protocol) -> bytes:
    full = LABEL_PREFIX[protocol] + label
    if len(full) > 249:
        raise LengthOverflow("label too long after prefixing")
    if len(context) > 255:
        raise LengthOverflow("context longer than 255 bytes")
    return (
        struct.pack("!HB", out_len, len(full))
        + full
        + struct.pack("!B", len(context))
        + context
    )


def hkdf_expand_label(
    prk: bytes,
    label: bytes,
    context: bytes,
    out_len: int,
    alg: HashAlg,
    protocol: Protocol,
) -> bytes:
    return hkdf_expand(prk, hkdf_label(label, context, out_len, protocol), out_len, alg)


# --- AEAD ------------------------------------------------------------------


def _aead(params: SuiteParams, key: bytes):
    if len(key) != params.key_len:
        raise ValueError(f"key must be {params.key_len} bytes")
    if params.aead_alg == AeadAlg.AES_CCM:
        return AESCCM(key, tag_length=params.tag_len)
    return AESGCM(key)


def aead_seal(
    params: SuiteParams, key: bytes, nonce: bytes, aad: bytes, plaintext: bytes
) -> bytes:
    if len(nonce) != params.iv_len:
        raise ValueError(f"nonce must be {params.iv_len} bytes")
    return _aead(params, key).encrypt(nonce, plaintext, aad)


def aead_open(
    params: SuiteParams, key: bytes, nonce: bytes, aad: bytes, ciphertext: bytes
) -> bytes:
    if len(nonce) != params.iv_len:
        raise ValueError(f"nonce must be {params.iv_len} bytes")
    try:
        return _aead(params, key).decrypt(nonce, ciphertext, aad)
    except InvalidTag:
        raise AuthenticationFailure("AEAD tag mismatch") from None


def block_encrypt(key: bytes, block: bytes) -> bytes:
    """One raw AES block; used only for sequence-number masking."""
    if len(block) != 16:
        raise ValueError("block must be 16 bytes")
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(block) + enc.finalize()


# --- transcript hash -------------------------------------------------------

MESSAGE_HASH_TYPE = 254


class TranscriptHash:
    """Running hash over TLS-form handshake messages.

    Incremental and one-shot use agree; after a HelloRetryRequest the
    accumulated transcript collapses into a synthetic message_hash
    message so both sides keep hashing from the same point.
    """

    def __init__(self, alg: HashAlg):
        self.alg = alg
        self._h = hash_new(alg)

    def update(self, message: bytes) -> None:
        self._h.update(message)

    def digest(self) -> bytes:
        return self._h.copy().digest()

    def replace_with_message_hash(self) -> bytes:
        """Collapse everything hashed so far into a message_hash message."""
        inner = self._h.digest()
        synthetic = bytes([MESSAGE_HASH_TYPE, 0, 0, len(inner)]) + inner
        self._h = hash_new(self.alg)
        self._h.update(synthetic)
        return synthetic


def transcript_hash(messages, alg: HashAlg) -> bytes:
    """One-shot transcript hash over an ordered message sequence."""
    t = TranscriptHash(alg)
    for m in messages:
        t.update(m)
    return t.digest()


# --- test-vector files -----------------------------------------------------


def load_hex_vectors(path) -> list:
    """Parse a vector file: one record per line, whitespace-separated hex
    fields, ``#`` starts a comment."""
    records = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            records.append([bytes.fromhex(f) if f != "-" else b"" for f in line.split()])
    return records
