"""Record protection: TLS 1.3 records and the DTLS 1.3 unified header.

The DTLS header byte is 001|C|S|L|EE.  AEAD additional data is the full
header with *plaintext* sequence bits; the sequence-number mask (one raw
AES block over the first 16 ciphertext bytes under sn_key) is applied
after sealing and removed before opening, so seal/open are exact
inverses.  Epoch-0 flights use the 13-byte DTLS 1.2-style header since
no keys exist yet.
"""

from dataclasses import dataclass
from enum import IntEnum

from . import crypto
from .crypto import SuiteParams
from .errors import (
    AllZeroInner,
    BadOuterType,
    DecodeError,
    RecordOverflow,
    ReplayedRecord,
)
from .keyschedule import TrafficKeys


class ContentType(IntEnum):
    CHANGE_CIPHER_SPEC = 20
    ALERT = 21
    HANDSHAKE = 22
    APPLICATION_DATA = 23
    ACK = 26


TLS_RECORD_HEADER_LEN = 5
DTLS12_RECORD_HEADER_LEN = 13  # type 1 + version 2 + epoch 2 + seq 6 + length 2
TLS_LEGACY_VERSION = 0x0303
DTLS12_WIRE_VERSION = 0xFEFD

_MAX_INNER = (1 << 14) + 256

_LEGACY_HEADER_SIZES = {
    "tls12": 5,
    "dtls12": 13,
    "tls13": 5,
    "dtls13_min": 2,  # header byte + 8-bit sequence
    "dtls13_max": 8,  # header byte + 4-byte CID + 8-bit sequence + length
}


def legacy_header_sizes(protocol_version: str) -> int:
    try:
        return _LEGACY_HEADER_SIZES[protocol_version]
    except KeyError:
        raise ValueError(f"unknown protocol version {protocol_version!r}") from None


def nonce_for(iv: bytes, seq64: int) -> bytes:
    """Per-record nonce: iv XOR left-zero-padded big-endian sequence."""
    if len(iv) != 12:
        raise ValueError("iv must be 12 bytes")
    pad = seq64.to_bytes(len(iv), "big")
    return bytes(a ^ b for a, b in zip(iv, pad))


def _inner_plaintext(payload: bytes, true_type: int, pad_len: int) -> bytes:
    return payload + bytes([true_type]) + bytes(pad_len)


def _strip_inner(plaintext: bytes) -> tuple:
    i = len(plaintext) - 1
    while i >= 0 and plaintext[i] == 0:
        i -= 1
    if i < 0:
        raise AllZeroInner("record deprotected to padding only")
    return plaintext[i], plaintext[:i]


# --- TLS 1.3 records -------------------------------------------------------


def seal_tls(params: SuiteParams, keys: TrafficKeys, true_type: int, payload: bytes, pad_len: int = 0) -> bytes:
    inner = _inner_plaintext(payload, true_type, pad_len)
    total = len(inner) + params.tag_len
    if total > _MAX_INNER:
        raise RecordOverflow(f"protected record of {total} bytes exceeds limit")
    header = bytes([ContentType.APPLICATION_DATA]) + TLS_LEGACY_VERSION.to_bytes(2, "big") + total.to_bytes(2, "big")
    seq = keys.next_write_seq()
    ct = crypto.aead_seal(params, keys.key, nonce_for(keys.iv, seq), header, inner)
    return header + ct


def open_tls(params: SuiteParams, keys: TrafficKeys, record: bytes) -> tuple:
    if len(record) < TLS_RECORD_HEADER_LEN:
        raise DecodeError("truncated record header")
    if record[0] != ContentType.APPLICATION_DATA:
        raise BadOuterType(f"outer content type {record[0]}")
    length = int.from_bytes(record[3:5], "big")
    if len(record) != TLS_RECORD_HEADER_LEN + length:
        raise DecodeError("record length mismatch")
    header, body = record[:5], record[5:]
    seq = keys.read_seq
    inner = crypto.aead_open(params, keys.key, nonce_for(keys.iv, seq), header, body)
    keys.note_read(seq)
    true_type, payload = _strip_inner(inner)
    return true_type, payload


def tls_record_length(header: bytes) -> int:
    if len(header) < TLS_RECORD_HEADER_LEN:
        raise DecodeError("truncated record header")
    return int.from_bytes(header[3:5], "big")


def encode_tls_plaintext(content_type: int, payload: bytes) -> bytes:
    return (
        bytes([content_type])
        + TLS_LEGACY_VERSION.to_bytes(2, "big")
        + len(payload).to_bytes(2, "big")
        + payload
    )


# --- DTLS 1.3 unified header -------------------------------------------------

_FIXED_BITS = 0b001


@dataclass
class UnifiedHeader:
    epoch_low: int
    seq_low: int
    seq_len: int  # 1 or 2 bytes on the wire
    cid: bytes = b""
    length_present: bool = False

    def first_byte(self) -> int:
        return (
            (_FIXED_BITS << 5)
            | ((1 if self.cid else 0) << 4)
            | ((1 if self.seq_len == 2 else 0) << 3)
            | ((1 if self.length_present else 0) << 2)
            | (self.epoch_low & 0x3)
        )

    def encode(self, ct_len: int) -> bytes:
        out = bytes([self.first_byte()]) + self.cid
        out += self.seq_low.to_bytes(self.seq_len, "big")
        if self.length_present:
            out += ct_len.to_bytes(2, "big")
        return out

    @property
    def size(self) -> int:
        return 1 + len(self.cid) + self.seq_len + (2 if self.length_present else 0)


def unified_header_size(cid_len: int, seq_16bit: bool, length_present: bool) -> int:
    return 1 + cid_len + (2 if seq_16bit else 1) + (2 if length_present else 0)


def is_unified_header(first_byte: int) -> bool:
    return (first_byte >> 5) == _FIXED_BITS


def seal_dtls(
    params: SuiteParams,
    keys: TrafficKeys,
    epoch: int,
    true_type: int,
    payload: bytes,
    *,
    cid: bytes = b"",
    seq_16bit: bool = False,
    length_present: bool = False,
    pad_len: int = 0,
) -> bytes:
    if keys.sn_key is None:
        raise ValueError("DTLS keys carry no sequence-number key")
    inner = _inner_plaintext(payload, true_type, pad_len)
    ct_len = len(inner) + params.tag_len
    if ct_len > _MAX_INNER:
        raise RecordOverflow(f"protected record of {ct_len} bytes exceeds limit")
    seq = keys.next_write_seq()
    seq_len = 2 if seq_16bit else 1
    header = UnifiedHeader(
        epoch_low=epoch & 0x3,
        seq_low=seq & ((1 << (8 * seq_len)) - 1),
        seq_len=seq_len,
        cid=cid,
        length_present=length_present,
    )
    aad = header.encode(ct_len)
    ct = crypto.aead_seal(params, keys.key, nonce_for(keys.iv, seq), aad, inner)
    mask = crypto.block_encrypt(keys.sn_key, ct[:16])[:seq_len]
    seq_off = 1 + len(cid)
    wire = bytearray(aad)
    for i in range(seq_len):
        wire[seq_off + i] ^= mask[i]
    return bytes(wire) + ct


class ReplayWindow:
    """64-entry sliding anti-replay bitmap."""

    SIZE = 64

    def __init__(self):
        self.max_seq = -1
        self.bits = 0

    @property
    def next_expected(self) -> int:
        return self.max_seq + 1

    def seen(self, seq: int) -> bool:
        if seq > self.max_seq:
            return False
        offset = self.max_seq - seq
        if offset >= self.SIZE:
            return True  # too old to track: treated as replayed
        return bool(self.bits & (1 << offset))

    def add(self, seq: int) -> None:
        if seq > self.max_seq:
            shift = seq - self.max_seq
            self.bits = ((self.bits << shift) | 1) & ((1 << self.SIZE) - 1)
            self.max_seq = seq
        else:
            self.bits |= 1 << (self.max_seq - seq)


def reconstruct_seq(seq_low: int, seq_len: int, expected: int) -> int:
    """Full 64-bit sequence: the value with the given low bits closest to
    the next expected sequence number."""
    mod = 1 << (8 * seq_len)
    base = expected - (expected % mod)
    best = None
    for cand in (base - mod + seq_low, base + seq_low, base + mod + seq_low):
        if cand < 0:
            continue
        if best is None or abs(cand - expected) < abs(best - expected):
            best = cand
    return best


@dataclass
class ParsedCiphertext:
    header: bytearray  # wire header bytes (sequence still masked)
    cid: bytes
    epoch_low: int
    seq_len: int
    seq_off: int
    ciphertext: bytes
    consumed: int


def parse_unified(datagram: bytes, offset: int, cid_len: int) -> ParsedCiphertext:
    if offset >= len(datagram):
        raise DecodeError("empty record slice")
    b0 = datagram[offset]
    if not is_unified_header(b0):
        raise BadOuterType("not a DTLS 1.3 ciphertext record")
    cid_present = bool(b0 & 0x10)
    seq_len = 2 if (b0 & 0x08) else 1
    length_present = bool(b0 & 0x04)
    epoch_low = b0 & 0x3
    pos = offset + 1
    cid = b""
    if cid_present:
        cid = bytes(datagram[pos : pos + cid_len])
        if len(cid) != cid_len:
            raise DecodeError("truncated connection id")
        pos += cid_len
    seq_off = pos - offset
    pos += seq_len
    if length_present:
        if pos + 2 > len(datagram):
            raise DecodeError("truncated length field")
        ct_len = int.from_bytes(datagram[pos : pos + 2], "big")
        pos += 2
        ct = datagram[pos : pos + ct_len]
        if len(ct) != ct_len:
            raise DecodeError("record length mismatch")
    else:
        ct = datagram[pos:]  # record extends to end of datagram
    pos += len(ct)
    header = bytearray(datagram[offset : offset + seq_off + seq_len])
    if length_present:
        header += len(ct).to_bytes(2, "big")
    if len(ct) < 16:
        raise DecodeError("short-ciphertext: sequence mask needs 16 bytes")
    return ParsedCiphertext(header, cid, epoch_low, seq_len, seq_off, bytes(ct), pos - offset)


def open_dtls(
    params: SuiteParams,
    keys: TrafficKeys,
    window: ReplayWindow,
    parsed: ParsedCiphertext,
) -> tuple:
    """Returns (full_seq, true_type, payload); replay window advances only
    after the tag verifies."""
    mask = crypto.block_encrypt(keys.sn_key, parsed.ciphertext[:16])[: parsed.seq_len]
    aad = bytearray(parsed.header)
    for i in range(parsed.seq_len):
        aad[parsed.seq_off + i] ^= mask[i]
    seq_low = int.from_bytes(aad[parsed.seq_off : parsed.seq_off + parsed.seq_len], "big")
    full_seq = reconstruct_seq(seq_low, parsed.seq_len, window.next_expected)
    if window.seen(full_seq):
        raise ReplayedRecord(f"sequence {full_seq} already accepted")
    inner = crypto.aead_open(
        params, keys.key, nonce_for(keys.iv, full_seq), bytes(aad), parsed.ciphertext
    )
    window.add(full_seq)
    keys.note_read(full_seq)
    true_type, payload = _strip_inner(inner)
    return full_seq, true_type, payload


# --- DTLS plaintext (epoch 0) records -----------------------------------------


def encode_dtls_plaintext(content_type: int, seq: int, payload: bytes) -> bytes:
    return (
        bytes([content_type])
        + DTLS12_WIRE_VERSION.to_bytes(2, "big")
        + (0).to_bytes(2, "big")
        + seq.to_bytes(6, "big")
        + len(payload).to_bytes(2, "big")
        + payload
    )


def parse_dtls_plaintext(datagram: bytes, offset: int) -> tuple:
    """Returns (content_type, seq, payload, consumed)."""
    if offset + DTLS12_RECORD_HEADER_LEN > len(datagram):
        raise DecodeError("truncated plaintext record header")
    content_type = datagram[offset]
    version = int.from_bytes(datagram[offset + 1 : offset + 3], "big")
    if version != DTLS12_WIRE_VERSION:
        raise DecodeError("unexpected plaintext record version")
    epoch = int.from_bytes(datagram[offset + 3 : offset + 5], "big")
    if epoch != 0:
        raise DecodeError("plaintext records only exist in epoch 0")
    seq = int.from_bytes(datagram[offset + 5 : offset + 11], "big")
    length = int.from_bytes(datagram[offset + 11 : offset + 13], "big")
    start = offset + DTLS12_RECORD_HEADER_LEN
    payload = datagram[start : start + length]
    if len(payload) != length:
        raise DecodeError("record length mismatch")
    return content_type, seq, payload, DTLS12_RECORD_HEADER_LEN + length
