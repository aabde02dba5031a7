"""Byte-exact handshake message and extension codecs.

decode(encode(m)) == m for every valid message and the decoders reject
truncations and trailing garbage, so the same bytes that feed the
transcript hash are the bytes on the wire.  DTLS messages use the
12-byte fragment header even when unfragmented; ``to_tls_form``
rewrites it to the 4-byte TLS header for transcript hashing.
"""

import struct
from dataclasses import dataclass, field
from enum import IntEnum

from .crypto import Protocol
from .errors import (
    ConfigConflict,
    DecodeError,
    FragmentGap,
    InconsistentDuplicate,
)

TLS_LEGACY_VERSION = 0x0303
TLS13_VERSION = 0x0304

# ServerHello.random sentinel marking a HelloRetryRequest.
HRR_RANDOM = bytes.fromhex(
    "cf21ad74e59a6111be1d8c021e65b891c2a211167abb8c5e079e09e2c8a8339c"
)

TLS_HANDSHAKE_HEADER_LEN = 4
DTLS_HANDSHAKE_HEADER_LEN = 12


class HandshakeType(IntEnum):
    CLIENT_HELLO = 1
    SERVER_HELLO = 2
    NEW_SESSION_TICKET = 4
    END_OF_EARLY_DATA = 5
    ENCRYPTED_EXTENSIONS = 8
    CERTIFICATE = 11
    CERTIFICATE_REQUEST = 13
    CERTIFICATE_VERIFY = 15
    FINISHED = 20
    MESSAGE_HASH = 254


class ExtensionType(IntEnum):
    SERVER_NAME = 0
    SUPPORTED_GROUPS = 10
    SIGNATURE_ALGORITHMS = 13
    PRE_SHARED_KEY = 41
    EARLY_DATA = 42
    SUPPORTED_VERSIONS = 43
    COOKIE = 44
    PSK_KEY_EXCHANGE_MODES = 45
    KEY_SHARE = 51
    CONNECTION_ID = 54


class PskMode(IntEnum):
    PSK_KE = 0
    PSK_DHE_KE = 1


# --- primitive codec helpers -------------------------------------------------


class Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise DecodeError("truncated-message")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def uint(self, width: int) -> int:
        return int.from_bytes(self.take(width), "big")

    def u8(self) -> int:
        return self.uint(1)

    def u16(self) -> int:
        return self.uint(2)

    def u24(self) -> int:
        return self.uint(3)

    def u32(self) -> int:
        return self.uint(4)

    def u64(self) -> int:
        return self.uint(8)

    def vec(self, len_width: int) -> bytes:
        return self.take(self.uint(len_width))

    @property
    def remaining(self) -> int:
        return len(self.data) - self.pos

    def expect_end(self, what: str) -> None:
        if self.remaining:
            raise DecodeError(f"length-mismatch: trailing bytes after {what}")


def _vec(len_width: int, payload: bytes) -> bytes:
    if len(payload) >= 1 << (8 * len_width):
        raise ValueError("vector payload too long")
    return len(payload).to_bytes(len_width, "big") + payload


def _u16list(values) -> bytes:
    return b"".join(struct.pack("!H", v) for v in values)


# --- extensions ---------------------------------------------------------------


@dataclass
class Extension:
    ext_type: int
    data: bytes

    def encode(self) -> bytes:
        return struct.pack("!H", self.ext_type) + _vec(2, self.data)


def _decode_extensions(r: Reader) -> list:
    exts = []
    seen = set()
    block = Reader(r.vec(2))
    while block.remaining:
        ext_type = block.u16()
        data = block.vec(2)
        if ext_type in seen:
            raise DecodeError(f"duplicate extension {ext_type}")
        seen.add(ext_type)
        exts.append(Extension(ext_type, data))
    return exts


def _encode_extensions(exts) -> bytes:
    return _vec(2, b"".join(e.encode() for e in exts))


def find_extension(exts, ext_type):
    for e in exts:
        if e.ext_type == ext_type:
            return e
    return None


def ext_supported_versions_client() -> Extension:
    return Extension(ExtensionType.SUPPORTED_VERSIONS, _vec(1, struct.pack("!H", TLS13_VERSION)))


def ext_supported_versions_server() -> Extension:
    return Extension(ExtensionType.SUPPORTED_VERSIONS, struct.pack("!H", TLS13_VERSION))


def ext_server_name(host: str) -> Extension:
    entry = b"\x00" + _vec(2, host.encode("ascii"))
    return Extension(ExtensionType.SERVER_NAME, _vec(2, entry))


def parse_server_name(data: bytes) -> str:
    r = Reader(data)
    lst = Reader(r.vec(2))
    r.expect_end("server_name")
    if lst.u8() != 0:
        raise DecodeError("unknown server_name type")
    host = lst.vec(2)
    lst.expect_end("server_name entry")
    return host.decode("ascii")


def ext_supported_groups(groups) -> Extension:
    return Extension(ExtensionType.SUPPORTED_GROUPS, _vec(2, _u16list(groups)))


def parse_u16_vec2(data: bytes) -> list:
    r = Reader(data)
    body = Reader(r.vec(2))
    r.expect_end("u16 list")
    out = []
    while body.remaining:
        out.append(body.u16())
    return out


def ext_signature_algorithms(schemes) -> Extension:
    return Extension(ExtensionType.SIGNATURE_ALGORITHMS, _vec(2, _u16list(schemes)))


def ext_psk_modes(modes) -> Extension:
    return Extension(ExtensionType.PSK_KEY_EXCHANGE_MODES, _vec(1, bytes(modes)))


def parse_psk_modes(data: bytes) -> list:
    r = Reader(data)
    modes = list(r.vec(1))
    r.expect_end("psk_key_exchange_modes")
    return modes


def ext_key_share_client(entries) -> Extension:
    body = b"".join(struct.pack("!H", g) + _vec(2, pub) for g, pub in entries)
    return Extension(ExtensionType.KEY_SHARE, _vec(2, body))


def parse_key_share_client(data: bytes) -> list:
    r = Reader(data)
    body = Reader(r.vec(2))
    r.expect_end("key_share")
    entries = []
    while body.remaining:
        group = body.u16()
        entries.append((group, body.vec(2)))
    return entries


def ext_key_share_server(group: int, pub: bytes) -> Extension:
    return Extension(ExtensionType.KEY_SHARE, struct.pack("!H", group) + _vec(2, pub))


def parse_key_share_server(data: bytes):
    r = Reader(data)
    group = r.u16()
    pub = r.vec(2)
    r.expect_end("key_share")
    return group, pub


def ext_pre_shared_key_offer(identity: bytes, obfuscated_age: int, binder: bytes) -> Extension:
    identities = _vec(2, _vec(2, identity) + struct.pack("!I", obfuscated_age))
    binders = _vec(2, _vec(1, binder))
    return Extension(ExtensionType.PRE_SHARED_KEY, identities + binders)


def parse_pre_shared_key_offer(data: bytes):
    r = Reader(data)
    ids = Reader(r.vec(2))
    identity = ids.vec(2)
    age = ids.u32()
    ids.expect_end("psk identity list")  # single PSK identity per hello
    binders = Reader(r.vec(2))
    binder = binders.vec(1)
    binders.expect_end("psk binder list")
    r.expect_end("pre_shared_key")
    return identity, age, binder


def psk_binders_trailer_len(hash_len: int) -> int:
    # binders vector (2) + one length-prefixed binder (1 + hash_len)
    return 2 + 1 + hash_len


def ext_pre_shared_key_server(selected_identity: int) -> Extension:
    return Extension(ExtensionType.PRE_SHARED_KEY, struct.pack("!H", selected_identity))


def ext_early_data() -> Extension:
    return Extension(ExtensionType.EARLY_DATA, b"")


def ext_early_data_ticket(max_early_data: int) -> Extension:
    return Extension(ExtensionType.EARLY_DATA, struct.pack("!I", max_early_data))


def ext_cookie(cookie: bytes) -> Extension:
    return Extension(ExtensionType.COOKIE, _vec(2, cookie))


def parse_cookie(data: bytes) -> bytes:
    r = Reader(data)
    cookie = r.vec(2)
    r.expect_end("cookie")
    return cookie


def ext_connection_id(cid: bytes) -> Extension:
    return Extension(ExtensionType.CONNECTION_ID, _vec(1, cid))


def parse_connection_id(data: bytes) -> bytes:
    r = Reader(data)
    cid = r.vec(1)
    r.expect_end("connection_id")
    return cid


# --- handshake messages --------------------------------------------------------


@dataclass
class ClientHello:
    MSG_TYPE = HandshakeType.CLIENT_HELLO
    random: bytes
    legacy_session_id: bytes
    cipher_suites: list
    extensions: list = field(default_factory=list)

    def encode_body(self) -> bytes:
        return (
            struct.pack("!H", TLS_LEGACY_VERSION)
            + self.random
            + _vec(1, self.legacy_session_id)
            + _vec(2, _u16list(self.cipher_suites))
            + _vec(1, b"\x00")
            + _encode_extensions(self.extensions)
        )

    @classmethod
    def decode_body(cls, body: bytes):
        r = Reader(body)
        if r.u16() != TLS_LEGACY_VERSION:
            raise DecodeError("bad legacy_version")
        random = r.take(32)
        session_id = r.vec(1)
        suites = []
        sv = Reader(r.vec(2))
        while sv.remaining:
            suites.append(sv.u16())
        if r.vec(1) != b"\x00":
            raise DecodeError("unsupported compression methods")
        exts = _decode_extensions(r)
        r.expect_end("ClientHello")
        for i, e in enumerate(exts):
            if e.ext_type == ExtensionType.PRE_SHARED_KEY and i != len(exts) - 1:
                raise DecodeError("pre_shared_key is not the final extension")
        return cls(random, session_id, suites, exts)


@dataclass
class ServerHello:
    MSG_TYPE = HandshakeType.SERVER_HELLO
    random: bytes
    legacy_session_id_echo: bytes
    cipher_suite: int
    extensions: list = field(default_factory=list)

    def encode_body(self) -> bytes:
        return (
            struct.pack("!H", TLS_LEGACY_VERSION)
            + self.random
            + _vec(1, self.legacy_session_id_echo)
            + struct.pack("!H", self.cipher_suite)
            + b"\x00"
            + _encode_extensions(self.extensions)
        )

    @classmethod
    def decode_body(cls, body: bytes):
        r = Reader(body)
        if r.u16() != TLS_LEGACY_VERSION:
            raise DecodeError("bad legacy_version")
        random = r.take(32)
        sid = r.vec(1)
        suite = r.u16()
        if r.u8() != 0:
            raise DecodeError("bad compression method")
        exts = _decode_extensions(r)
        r.expect_end("ServerHello")
        return cls(random, sid, suite, exts)


@dataclass
class EncryptedExtensions:
    MSG_TYPE = HandshakeType.ENCRYPTED_EXTENSIONS
    extensions: list = field(default_factory=list)

    def encode_body(self) -> bytes:
        return _encode_extensions(self.extensions)

    @classmethod
    def decode_body(cls, body: bytes):
        r = Reader(body)
        exts = _decode_extensions(r)
        r.expect_end("EncryptedExtensions")
        return cls(exts)


@dataclass
class Certificate:
    MSG_TYPE = HandshakeType.CERTIFICATE
    request_context: bytes = b""
    entries: list = field(default_factory=list)  # (cert_data, extensions bytes)

    def encode_body(self) -> bytes:
        body = b"".join(_vec(3, data) + _vec(2, exts) for data, exts in self.entries)
        return _vec(1, self.request_context) + _vec(3, body)

    @classmethod
    def decode_body(cls, body: bytes):
        r = Reader(body)
        ctx = r.vec(1)
        lst = Reader(r.vec(3))
        r.expect_end("Certificate")
        entries = []
        while lst.remaining:
            entries.append((lst.vec(3), lst.vec(2)))
        return cls(ctx, entries)


@dataclass
class CertificateRequest:
    MSG_TYPE = HandshakeType.CERTIFICATE_REQUEST
    request_context: bytes = b""
    extensions: list = field(default_factory=list)

    def encode_body(self) -> bytes:
        return _vec(1, self.request_context) + _encode_extensions(self.extensions)

    @classmethod
    def decode_body(cls, body: bytes):
        r = Reader(body)
        ctx = r.vec(1)
        exts = _decode_extensions(r)
        r.expect_end("CertificateRequest")
        return cls(ctx, exts)


@dataclass
class CertificateVerify:
    MSG_TYPE = HandshakeType.CERTIFICATE_VERIFY
    scheme: int
    signature: bytes

    def encode_body(self) -> bytes:
        return struct.pack("!H", self.scheme) + _vec(2, self.signature)

    @classmethod
    def decode_body(cls, body: bytes):
        r = Reader(body)
        scheme = r.u16()
        sig = r.vec(2)
        r.expect_end("CertificateVerify")
        return cls(scheme, sig)


@dataclass
class Finished:
    MSG_TYPE = HandshakeType.FINISHED
    verify_data: bytes

    def encode_body(self) -> bytes:
        return self.verify_data

    @classmethod
    def decode_body(cls, body: bytes):
        return cls(body)


@dataclass
class NewSessionTicket:
    MSG_TYPE = HandshakeType.NEW_SESSION_TICKET
    lifetime: int
    age_add: int
    nonce: bytes
    ticket: bytes
    extensions: list = field(default_factory=list)

    def encode_body(self) -> bytes:
        return (
            struct.pack("!II", self.lifetime, self.age_add)
            + _vec(1, self.nonce)
            + _vec(2, self.ticket)
            + _encode_extensions(self.extensions)
        )

    @classmethod
    def decode_body(cls, body: bytes):
        r = Reader(body)
        lifetime = r.u32()
        age_add = r.u32()
        nonce = r.vec(1)
        ticket = r.vec(2)
        exts = _decode_extensions(r)
        r.expect_end("NewSessionTicket")
        return cls(lifetime, age_add, nonce, ticket, exts)


@dataclass
class EndOfEarlyData:
    MSG_TYPE = HandshakeType.END_OF_EARLY_DATA

    def encode_body(self) -> bytes:
        return b""

    @classmethod
    def decode_body(cls, body: bytes):
        if body:
            raise DecodeError("EndOfEarlyData carries no body")
        return cls()


_MESSAGE_TYPES = {
    cls.MSG_TYPE: cls
    for cls in (
        ClientHello,
        ServerHello,
        EncryptedExtensions,
        Certificate,
        CertificateRequest,
        CertificateVerify,
        Finished,
        NewSessionTicket,
        EndOfEarlyData,
    )
}


def tls_form(msg) -> bytes:
    body = msg.encode_body()
    if len(body) >= 1 << 24:
        raise ValueError("handshake body exceeds 24-bit length")
    return bytes([msg.MSG_TYPE]) + len(body).to_bytes(3, "big") + body


def encode_handshake(msg, protocol: Protocol, message_seq: int = 0) -> bytes:
    """Wire encoding: 4-byte TLS framing or 12-byte DTLS fragment header."""
    body = msg.encode_body()
    if protocol == Protocol.TLS:
        return bytes([msg.MSG_TYPE]) + len(body).to_bytes(3, "big") + body
    return DtlsFragment(
        msg.MSG_TYPE, len(body), message_seq, 0, len(body), body
    ).encode()


def decode_handshake(data: bytes, protocol: Protocol = Protocol.TLS):
    if protocol == Protocol.DTLS:
        frag = decode_dtls_fragment(data)
        return decode_handshake(frag.to_tls_form())
    r = Reader(data)
    msg_type = r.u8()
    body = r.vec(3)
    r.expect_end("handshake message")
    cls = _MESSAGE_TYPES.get(msg_type)
    if cls is None:
        raise DecodeError(f"unknown-type: handshake type {msg_type}")
    return cls.decode_body(body)


# --- DTLS fragmentation ---------------------------------------------------------


@dataclass
class DtlsFragment:
    msg_type: int
    length: int
    message_seq: int
    fragment_offset: int
    fragment_length: int
    body: bytes

    def encode(self) -> bytes:
        return (
            bytes([self.msg_type])
            + self.length.to_bytes(3, "big")
            + struct.pack("!H", self.message_seq)
            + self.fragment_offset.to_bytes(3, "big")
            + self.fragment_length.to_bytes(3, "big")
            + self.body
        )

    @property
    def complete(self) -> bool:
        return self.fragment_offset == 0 and self.fragment_length == self.length

    def to_tls_form(self) -> bytes:
        """Drop message_seq/fragment fields so DTLS and TLS hash alike."""
        if not self.complete:
            raise ValueError("cannot rewrite an incomplete fragment")
        return bytes([self.msg_type]) + self.length.to_bytes(3, "big") + self.body


def decode_dtls_fragment(data: bytes) -> DtlsFragment:
    frag, consumed = parse_dtls_fragment(data)
    if consumed != len(data):
        raise DecodeError("length-mismatch: trailing bytes after fragment")
    return frag


def parse_dtls_fragment(data: bytes) -> tuple:
    """Parse one fragment from the front of ``data``; returns (fragment, consumed)."""
    r = Reader(data)
    msg_type = r.u8()
    length = r.u24()
    message_seq = r.u16()
    offset = r.u24()
    frag_len = r.u24()
    if offset + frag_len > length:
        raise DecodeError("fragment range exceeds message length")
    body = r.take(frag_len)
    return DtlsFragment(msg_type, length, message_seq, offset, frag_len, body), r.pos


def fragment(msg_bytes: bytes, mtu_budget: int) -> list:
    """Split a complete DTLS handshake message into encodable fragments,
    each at most ``mtu_budget`` bytes."""
    if mtu_budget <= DTLS_HANDSHAKE_HEADER_LEN:
        raise ValueError("mtu budget leaves no room for fragment bodies")
    whole = decode_dtls_fragment(msg_bytes)
    if not whole.complete:
        raise ValueError("input must be an unfragmented message")
    chunk = mtu_budget - DTLS_HANDSHAKE_HEADER_LEN
    frags = []
    for off in range(0, whole.length, chunk) or [0]:  # zero-length body: one carrier
        part = whole.body[off : off + chunk]
        frags.append(
            DtlsFragment(whole.msg_type, whole.length, whole.message_seq, off, len(part), part)
        )
    return frags


class FragmentBuffer:
    """Collects fragments of one message; order-insensitive, duplicate-tolerant."""

    def __init__(self, msg_type: int, length: int, message_seq: int):
        self.msg_type = msg_type
        self.length = length
        self.message_seq = message_seq
        self.buf = bytearray(length)
        self.have = [False] * length

    def add(self, frag: DtlsFragment) -> None:
        if (frag.msg_type, frag.length, frag.message_seq) != (
            self.msg_type,
            self.length,
            self.message_seq,
        ):
            raise InconsistentDuplicate("fragment header fields disagree")
        for i, b in enumerate(frag.body, start=frag.fragment_offset):
            if self.have[i] and self.buf[i] != b:
                raise InconsistentDuplicate(f"byte {i} differs between fragments")
            self.buf[i] = b
            self.have[i] = True

    @property
    def complete(self) -> bool:
        return all(self.have)

    def assemble(self) -> bytes:
        if not self.complete:
            missing = self.have.index(False)
            raise FragmentGap(f"gap-on-flush: first missing byte {missing}")
        return DtlsFragment(
            self.msg_type, self.length, self.message_seq, 0, self.length, bytes(self.buf)
        ).encode()


def reassemble(fragments) -> bytes:
    fragments = list(fragments)
    if not fragments:
        raise FragmentGap("no fragments")
    first = fragments[0]
    buf = FragmentBuffer(first.msg_type, first.length, first.message_seq)
    for f in fragments:
        buf.add(f)
    return buf.assemble()


# --- builders ---------------------------------------------------------------------


def build_client_hello(
    rng,
    suites,
    *,
    compat_session: bool = False,
    key_share_entries=None,
    groups=None,
    sig_algs=None,
    server_name: str | None = None,
    psk_identity: bytes | None = None,
    obfuscated_age: int = 0,
    binder_len: int = 0,
    psk_modes=None,
    early_data: bool = False,
    cookie: bytes | None = None,
    cid: bytes | None = None,
) -> ClientHello:
    """Assemble a ClientHello in canonical extension order (pre_shared_key
    last, zero-filled binder to be patched once the transcript is known)."""
    if early_data and psk_identity is None:
        raise ConfigConflict("0-RTT requires an offered PSK")
    exts = [ext_supported_versions_client()]
    if groups:
        exts.append(ext_supported_groups(groups))
    if sig_algs:
        exts.append(ext_signature_algorithms(sig_algs))
    if server_name is not None:
        exts.append(ext_server_name(server_name))
    if cid is not None:
        exts.append(ext_connection_id(cid))
    if cookie is not None:
        exts.append(ext_cookie(cookie))
    if key_share_entries is not None:
        exts.append(ext_key_share_client(key_share_entries))
    if early_data:
        exts.append(ext_early_data())
    if psk_identity is not None:
        exts.append(ext_psk_modes(psk_modes or [PskMode.PSK_KE]))
        exts.append(
            ext_pre_shared_key_offer(psk_identity, obfuscated_age, bytes(binder_len))
        )
    return ClientHello(
        random=rng.randbytes(32),
        legacy_session_id=rng.randbytes(32) if compat_session else b"",
        cipher_suites=list(suites),
        extensions=exts,
    )


def truncated_tls_form(ch: ClientHello, hash_len: int) -> bytes:
    """TLS-form ClientHello bytes up to (excluding) the binders list."""
    full = tls_form(ch)
    return full[: len(full) - psk_binders_trailer_len(hash_len)]


def patch_binder(ch: ClientHello, binder: bytes) -> None:
    ext = find_extension(ch.extensions, ExtensionType.PRE_SHARED_KEY)
    if ext is None:
        raise ConfigConflict("no pre_shared_key extension to patch")
    identity, age, old = parse_pre_shared_key_offer(ext.data)
    if len(old) != len(binder):
        raise ValueError("binder length mismatch")
    ext.data = ext_pre_shared_key_offer(identity, age, binder).data


def build_server_hello(
    random32: bytes,
    session_id_echo: bytes,
    suite: int,
    *,
    key_share_entry=None,
    selected_psk: int | None = None,
    cid: bytes | None = None,
) -> ServerHello:
    exts = [ext_supported_versions_server()]
    if cid is not None:
        exts.append(ext_connection_id(cid))
    if key_share_entry is not None:
        exts.append(ext_key_share_server(*key_share_entry))
    if selected_psk is not None:
        exts.append(ext_pre_shared_key_server(selected_psk))
    return ServerHello(random32, session_id_echo, suite, exts)


def build_hello_retry_request(suite: int, cookie: bytes, session_id_echo: bytes = b"") -> ServerHello:
    exts = [ext_supported_versions_server(), ext_cookie(cookie)]
    return ServerHello(HRR_RANDOM, session_id_echo, suite, exts)


def is_hello_retry_request(sh: ServerHello) -> bool:
    return sh.random == HRR_RANDOM


def build_certificate(request_context: bytes, cert_blobs) -> Certificate:
    return Certificate(request_context, [(blob, b"") for blob in cert_blobs])


def build_certificate_request(sig_algs, request_context: bytes = b"") -> CertificateRequest:
    return CertificateRequest(request_context, [ext_signature_algorithms(sig_algs)])


def build_certificate_verify(scheme: int, signature: bytes) -> CertificateVerify:
    return CertificateVerify(scheme, signature)


def build_finished(mac: bytes) -> Finished:
    return Finished(mac)


def build_new_session_ticket(
    lifetime: int, age_add: int, nonce: bytes, ticket: bytes, max_early_data: int | None = None
) -> NewSessionTicket:
    exts = [] if max_early_data is None else [ext_early_data_ticket(max_early_data)]
    return NewSessionTicket(lifetime, age_add, nonce, ticket, exts)


def build_end_of_early_data() -> EndOfEarlyData:
    return EndOfEarlyData()


_CV_CONTEXT = {
    "server": b"TLS 1.3, server CertificateVerify",
    "client": b"TLS 1.3, client CertificateVerify",
}


def certificate_verify_content(role: str, transcript_hash: bytes) -> bytes:
    """Bytes actually signed: 64 pad bytes, role context, NUL, transcript hash."""
    return b" " * 64 + _CV_CONTEXT[role] + b"\x00" + transcript_hash


# --- ACK bodies (DTLS record content type 26, not a handshake message) ------------


def build_ack(record_numbers) -> bytes:
    body = b"".join(struct.pack("!QQ", epoch, seq) for epoch, seq in record_numbers)
    return _vec(2, body)


def parse_ack(data: bytes) -> list:
    r = Reader(data)
    body = Reader(r.vec(2))
    r.expect_end("ack")
    if body.remaining % 16:
        raise DecodeError("ack entries must be 16 bytes each")
    out = []
    while body.remaining:
        out.append((body.u64(), body.u64()))
    return out


def dump_line(direction: str, raw_tls_form: bytes) -> str:
    """One transcript-dump line: direction, message name, length, hex."""
    try:
        name = HandshakeType(raw_tls_form[0]).name.lower()
    except ValueError:
        name = f"type_{raw_tls_form[0]}"
    return f"{direction} {name} {len(raw_tls_form)} {raw_tls_form.hex()}"
