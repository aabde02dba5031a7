"""Client and server connection state machines.

One Connection per endpoint, driven by explicit simulated time.  The
DTLS side adds per-message retransmission with explicit ACK records,
stateless cookie DoS protection, CID demultiplexing and anti-replay;
the TLS side runs the same flows over a reliable stream.
"""

import logging
import random
from dataclasses import dataclass, field, replace
from enum import Enum

from . import crypto, ec, messages, records
from .crypto import Protocol, SuiteId
from .errors import (
    BadBinder,
    BadFinished,
    BadSignature,
    ConfigConflict,
    DecodeError,
    ExpiredTicket,
    HandshakeTimeout,
    NoCommonGroup,
    NoCommonSuite,
    NotReady,
    ProtocolError,
    UnexpectedMessage,
    UnknownTicket,
)
from .keyschedule import KeySchedule, PskKind
from .messages import ExtensionType, HandshakeType
from .profiles import GROUP_SCHEME, AuthMode, EcCredential, PskCredential
from .records import ContentType, ReplayWindow

log = logging.getLogger(__name__)

RTO_INITIAL_MS = 400
RTO_MAX_RETRIES = 8
ACK_DELAY_MS = 150
TICKET_LIFETIME_S = 7200
TICKET_AGE_TOLERANCE_MS = 10_000

EPOCH_PLAIN = 0
EPOCH_EARLY = 1
EPOCH_HANDSHAKE = 2
EPOCH_APP = 3


class Phase(Enum):
    START = "start"
    WAIT_SH = "wait_sh"
    WAIT_EE = "wait_ee"
    WAIT_CERT_CR = "wait_cert_cr"
    WAIT_CV = "wait_cv"
    WAIT_FINISHED = "wait_finished"
    CONNECTED = "connected"
    FAILED = "failed"


class EventKind(str, Enum):
    FLIGHT_READY = "flight_ready"
    HANDSHAKE_COMPLETE = "handshake_complete"
    APP_DATA = "app_data"
    EARLY_DATA = "early_data"
    TICKET = "ticket"
    ALERT = "alert"
    ADDRESS_MIGRATED = "address_migrated"


@dataclass
class Event:
    t: int
    kind: EventKind
    detail: dict = field(default_factory=dict)

    def line(self, conn_id: str) -> str:
        detail = ",".join(f"{k}={v}" for k, v in sorted(self.detail.items()))
        return f"{self.t} {conn_id} {self.kind.value} {detail}"


@dataclass
class OpCounters:
    aead_seal: int = 0
    aead_open: int = 0
    hash_blocks: int = 0
    dh_ops: int = 0
    sign_ops: int = 0
    verify_ops: int = 0
    hkdf_ops: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class OutRecord:
    data: bytes
    name: str
    retransmit: bool = False


@dataclass
class TicketState:
    """Client-side resumption material from one NewSessionTicket."""

    ticket: bytes
    psk: bytes
    suite: SuiteId
    age_add: int
    received_at: int
    lifetime_s: int
    max_early_data: int


_ALERT_CODES = {
    "close_notify": 0,
    "unexpected_message": 10,
    "bad_record_mac": 20,
    "handshake_failure": 40,
    "bad_certificate_verify": 42,
    "illegal_parameter": 47,
    "decode_error": 50,
    "decrypt_error": 51,
}


@dataclass
class ConnConfig:
    protocol: Protocol
    mode: AuthMode
    suites: tuple
    groups: tuple = ()
    psk: PskCredential | None = None
    psk_kind: PskKind = PskKind.EXTERNAL
    local_ec: EcCredential | None = None
    peer_ec: EcCredential | None = None  # pinned peer public key (trust anchor)
    mutual: bool = False
    sni: str | None = None
    compat: bool = False
    early_payload: bytes = b""
    cert_size: int = 500
    cid_len: int = 0  # length of the CID this endpoint asks peers to send
    offer_cid: bool = False  # send the extension even with an empty CID
    pad_len: int = 0
    tickets: bool = False
    dos: bool = False
    mtu: int = 1280
    packing: bool = False
    resume: TicketState | None = None
    accept_early: bool = True
    debug_tamper: object = None  # test hook: fn(name, tls_form) -> tls_form


def _negotiate(server_pref, client_offer, exc, what):
    for item in server_pref:
        if item in client_offer:
            return item
    raise exc(f"no common {what}")


class Connection:
    def __init__(self, cfg: ConnConfig, role: str, rng: random.Random, conn_id: str = ""):
        if cfg.mode == AuthMode.ZERO_RTT and cfg.psk is None and cfg.resume is None and role == "client":
            raise ConfigConflict("0-RTT requires PSK or resumption material")
        if role == "server" and cfg.mode in (AuthMode.PK_MUTUAL, AuthMode.PK_SERVER_ONLY):
            if cfg.local_ec is None:
                raise ConfigConflict("certificate mode without a server credential")
        self.cfg = cfg
        self.role = role
        self.rng = rng
        self.conn_id = conn_id or role[0].upper()
        self.protocol = cfg.protocol
        self.phase = Phase.START
        self.counters = OpCounters()
        self.events: list = []
        self.event_log: list = []
        self.failure: str | None = None
        self.failed_from: str | None = None

        self.suite = cfg.suites[0]
        self.params = crypto.suite_params(self.suite)
        self.ks: KeySchedule | None = None
        self.transcript: list = []  # TLS-form handshake bytes, in order

        self.epochs: dict = {}  # epoch -> {"read": TrafficKeys, "write": TrafficKeys}
        self.windows: dict = {}  # epoch -> ReplayWindow (DTLS receive)
        self.plain_write_seq = 0
        self.plain_window = ReplayWindow()

        self.next_send_msg_seq = 0
        self.next_recv_msg_seq = 0
        self.inbound_frags: dict = {}
        self.recv_flight: list = []  # record numbers of the inbound flight
        self.stale_records: list = []

        self.sent_unacked: dict = {}  # (epoch, rec_seq) -> dict(msg_seq,name,frag,epoch)
        self.rto_ms = RTO_INITIAL_MS
        self.retries = 0
        self.retransmit_at: int | None = None
        self.ack_at: int | None = None

        self.cid_local: bytes | None = None  # peers put this in records they send us
        self.cid_peer: bytes | None = None  # we put this in records we send
        self.peer_offered_cid = False
        self.listener = None  # backref for server connections

        self.dh_priv = None
        self.dh_secret: bytes | None = None  # retained for schedule audits
        self.client_cert_requested = False
        self.early_accepted = False
        self.early_rejected = False
        self.hrr_done = False
        self.psk_in_use: PskCredential | None = None
        self.psk_kind_in_use = cfg.psk_kind
        self.obfuscated_age = 0
        self.negotiated_mode: AuthMode | None = None
        self.client_tickets: list = []
        self.ticket_nonce_counter = 0
        self.auth_reads = 0  # records that decrypted successfully

        self._now = 0
        self._stream_buf = b""
        self._hs_buf = b""  # reassembly buffer for the TLS handshake stream
        self._tls_read_epoch = EPOCH_PLAIN
        self._ccs_sent = False

    # ------------------------------------------------------------------ util

    def _event(self, now: int, kind: EventKind, **detail) -> None:
        ev = Event(now, kind, detail)
        self.events.append(ev)
        self.event_log.append(ev)

    def poll_events(self) -> list:
        out, self.events = self.events, []
        return out

    @property
    def connected(self) -> bool:
        return self.phase == Phase.CONNECTED

    @property
    def failed(self) -> bool:
        return self.phase == Phase.FAILED

    def _fail(self, now: int, exc: ProtocolError) -> list:
        self.failed_from = self.phase.value
        self.phase = Phase.FAILED
        self.failure = exc.alert
        self.retransmit_at = None  # a dead connection keeps no timers
        self.ack_at = None
        self.sent_unacked.clear()
        self._event(now, EventKind.ALERT, alert=exc.alert, fatal=True)
        log.debug("%s failed: %s (%s)", self.conn_id, exc.alert, exc)
        return self._emit_alert(_ALERT_CODES.get(exc.alert, 80))

    def _peer_alert(self, now: int, code: int = -1) -> None:
        self.failed_from = self.phase.value
        self.phase = Phase.FAILED
        self.failure = "peer_alert"
        self.retransmit_at = None
        self.ack_at = None
        self.sent_unacked.clear()
        self._event(now, EventKind.ALERT, alert="peer_alert", code=code)

    def _emit_alert(self, code: int) -> list:
        body = bytes([2, code])
        try:
            epoch = self._current_write_epoch()
            if epoch == EPOCH_PLAIN:
                if self.protocol == Protocol.TLS:
                    data = records.encode_tls_plaintext(ContentType.ALERT, body)
                else:
                    data = records.encode_dtls_plaintext(
                        ContentType.ALERT, self._next_plain_seq(), body
                    )
            else:
                data = self._seal(epoch, ContentType.ALERT, body)
            return [OutRecord(data, "alert")]
        except (ProtocolError, KeyError):
            return []

    def _current_write_epoch(self) -> int:
        for epoch in (EPOCH_APP, EPOCH_HANDSHAKE):
            if "write" in self.epochs.get(epoch, {}):
                return epoch
        return EPOCH_PLAIN

    def _next_plain_seq(self) -> int:
        seq = self.plain_write_seq
        self.plain_write_seq += 1
        return seq

    def _install(self, epoch: int, direction: str, secret: bytes) -> None:
        keys = self.ks.traffic_keys(secret)
        self.epochs.setdefault(epoch, {})[direction] = keys
        if direction == "read":
            self.windows[epoch] = ReplayWindow()

    def _th(self, extra=()) -> bytes:
        msgs = self.transcript + list(extra)
        self.counters.hash_blocks += (sum(map(len, msgs)) + 63) // 64
        return crypto.transcript_hash(msgs, self.params.hash_alg)

    # ------------------------------------------------------------- crypto ops

    def _keypair(self, group):
        self.counters.dh_ops += 1
        return ec.keypair(group, self.rng)

    def _shared(self, priv, peer_pub):
        self.counters.dh_ops += 1
        return ec.shared_secret(priv, peer_pub)

    def _sign(self, cred: EcCredential, content: bytes) -> bytes:
        self.counters.sign_ops += 1
        priv = ec.EcPrivateKey(cred.group, cred.private_value)
        sig = ec.sign(priv, cred.scheme, content)
        # verify-after-sign: never emit a signature that fails locally
        if not self._verify(cred.public_point, cred.scheme, content, sig):
            raise BadSignature("self-check of fresh signature failed")
        return sig

    def _verify(self, pub: bytes, scheme, content: bytes, sig: bytes) -> bool:
        self.counters.verify_ops += 1
        return ec.verify(pub, scheme, content, sig)

    def _seal(self, epoch: int, true_type: int, payload: bytes) -> bytes:
        keys = self.epochs[epoch]["write"]
        self.counters.aead_seal += 1
        if self.protocol == Protocol.TLS:
            return records.seal_tls(self.params, keys, true_type, payload, self.cfg.pad_len)
        cid = b""
        if true_type == ContentType.APPLICATION_DATA and self.cid_peer:
            cid = self.cid_peer
        return records.seal_dtls(
            self.params,
            keys,
            epoch,
            true_type,
            payload,
            cid=cid,
            length_present=self.cfg.packing,
            pad_len=self.cfg.pad_len,
        )

    # ------------------------------------------------------------ sending side

    def _emit_handshake(self, msgs_with_epochs, now: int) -> list:
        out = []
        for msg, epoch in msgs_with_epochs:
            raw = messages.tls_form(msg)
            name = HandshakeType(raw[0]).name.lower()
            if self.cfg.debug_tamper is not None:
                raw = self.cfg.debug_tamper(name, raw) or raw
            if msg.MSG_TYPE != HandshakeType.NEW_SESSION_TICKET:
                self.transcript.append(raw)
            out.extend(self._send_raw_handshake(raw, name, epoch))
        return out

    def _send_raw_handshake(self, raw_tls_form: bytes, name: str, epoch: int) -> list:
        if self.protocol == Protocol.TLS:
            if epoch == EPOCH_PLAIN:
                rec = records.encode_tls_plaintext(ContentType.HANDSHAKE, raw_tls_form)
            else:
                rec = self._seal(epoch, ContentType.HANDSHAKE, raw_tls_form)
            return [OutRecord(rec, name)]
        body = raw_tls_form[4:]
        msg_seq = self.next_send_msg_seq
        self.next_send_msg_seq += 1
        full = messages.DtlsFragment(
            raw_tls_form[0], len(body), msg_seq, 0, len(body), body
        ).encode()
        out = []
        for frag in messages.fragment(full, self._fragment_budget(epoch)):
            out.append(self._send_dtls_fragment(frag.encode(), name, epoch, msg_seq, track=True))
        return out

    def _fragment_budget(self, epoch: int) -> int:
        if epoch == EPOCH_PLAIN:
            overhead = records.DTLS12_RECORD_HEADER_LEN
        else:
            overhead = (
                records.unified_header_size(0, False, self.cfg.packing)
                + 1
                + self.params.tag_len
            )
        budget = self.cfg.mtu - overhead
        if budget <= messages.DTLS_HANDSHAKE_HEADER_LEN:
            raise ConfigConflict("mtu too small for any handshake fragment")
        return budget

    def _send_dtls_fragment(
        self, frag_bytes: bytes, name: str, epoch: int, msg_seq: int, track: bool, retransmit: bool = False
    ) -> OutRecord:
        if epoch == EPOCH_PLAIN:
            rec_seq = self._next_plain_seq()
            data = records.encode_dtls_plaintext(ContentType.HANDSHAKE, rec_seq, frag_bytes)
        else:
            rec_seq = self.epochs[epoch]["write"].write_seq  # consumed by the seal
            data = self._seal(epoch, ContentType.HANDSHAKE, frag_bytes)
        if track:
            self.sent_unacked[(epoch, rec_seq)] = {
                "msg_seq": msg_seq,
                "name": name,
                "frag": frag_bytes,
                "epoch": epoch,
            }
            if self.retransmit_at is None:
                self.retransmit_at = self._now + self.rto_ms
        return OutRecord(data, name, retransmit=retransmit)

    def _send_ack(self, record_numbers) -> list:
        if self.protocol != Protocol.DTLS or not record_numbers:
            return []
        epoch = self._current_write_epoch()
        if epoch == EPOCH_PLAIN:
            return []  # ACKs only exist under record protection
        body = messages.build_ack(sorted(set(record_numbers)))
        return [OutRecord(self._seal(epoch, ContentType.ACK, body), "ack")]

    def _fake_ccs(self) -> OutRecord:
        # compat mode artifact: legacy type 20, body 0x01, ignored on receipt
        return OutRecord(
            records.encode_tls_plaintext(ContentType.CHANGE_CIPHER_SPEC, b"\x01"), "ccs"
        )

    # -------------------------------------------------------------- client side

    def start(self, now: int) -> list:
        """Client only: build and emit the first flight."""
        if self.role != "client" or self.phase != Phase.START:
            raise NotReady("start() applies to a fresh client")
        self._now = now
        out = self._client_hello_flight(now, cookie=None)
        self._event(now, EventKind.FLIGHT_READY, flight="client_hello")
        return out

    def _psk_offer(self, now: int):
        if self.cfg.resume is not None:
            tk = self.cfg.resume
            age_ms = now - tk.received_at
            self.obfuscated_age = (age_ms + tk.age_add) & 0xFFFFFFFF
            self.psk_kind_in_use = PskKind.RESUMPTION
            self.psk_in_use = PskCredential(tk.ticket, tk.psk)
            return self.psk_in_use
        if self.cfg.psk is not None and self.cfg.mode in (
            AuthMode.PSK,
            AuthMode.PSK_ECDHE,
            AuthMode.ZERO_RTT,
        ):
            self.obfuscated_age = 0
            self.psk_kind_in_use = self.cfg.psk_kind
            self.psk_in_use = self.cfg.psk
            return self.psk_in_use
        return None

    def _client_hello_flight(self, now: int, cookie: bytes | None) -> list:
        cfg = self.cfg
        psk = self._psk_offer(now)
        offer_share = cfg.mode in (AuthMode.PK_MUTUAL, AuthMode.PK_SERVER_ONLY, AuthMode.PSK_ECDHE)
        cert_mode = cfg.mode in (AuthMode.PK_MUTUAL, AuthMode.PK_SERVER_ONLY)
        share_entries = None
        if offer_share:
            if not cfg.groups:
                raise ConfigConflict("key-share modes need a named group")
            if self.dh_priv is None:
                self.dh_priv, pub = self._keypair(cfg.groups[0])
            else:
                pub = self.dh_priv.public_bytes()
            share_entries = [(int(cfg.groups[0]), pub)]  # exactly one key share
        psk_modes = None
        if psk is not None:
            psk_modes = [
                messages.PskMode.PSK_DHE_KE if offer_share else messages.PskMode.PSK_KE
            ]
        ch = messages.build_client_hello(
            self.rng,
            [int(s) for s in cfg.suites],
            compat_session=cfg.compat and self.protocol == Protocol.TLS,
            key_share_entries=share_entries,
            groups=[int(g) for g in cfg.groups] if offer_share else None,
            sig_algs=[int(s) for s in self._scheme_list()] if cert_mode else None,
            server_name=cfg.sni if cert_mode else None,
            psk_identity=psk.identity if psk else None,
            obfuscated_age=self.obfuscated_age,
            binder_len=self.params.hash_len if psk else 0,
            psk_modes=psk_modes,
            early_data=cfg.mode == AuthMode.ZERO_RTT and bool(cfg.early_payload),
            cookie=cookie,
            cid=self._advertised_cid(),
        )
        if psk is not None:
            self.ks = KeySchedule(self.suite, self.protocol, self.counters)
            self.ks.init_early(psk.secret, self.psk_kind_in_use)
            trunc = messages.truncated_tls_form(ch, self.params.hash_len)
            th = crypto.transcript_hash(self.transcript + [trunc], self.params.hash_alg)
            messages.patch_binder(ch, self.ks.compute_binder(th))
        else:
            self.ks = KeySchedule(self.suite, self.protocol, self.counters)
            self.ks.init_early()
        out = self._emit_handshake([(ch, EPOCH_PLAIN)], now)
        self.phase = Phase.WAIT_SH
        if cfg.mode == AuthMode.ZERO_RTT and cfg.early_payload:
            out.extend(self._send_early_data())
        return out

    def _scheme_list(self):
        return [GROUP_SCHEME[g] for g in self.cfg.groups] or [
            crypto.SignatureScheme.ECDSA_SECP256R1_SHA256
        ]

    def _advertised_cid(self) -> bytes | None:
        if self.protocol != Protocol.DTLS:
            return None
        if self.cfg.cid_len:
            if self.cid_local is None:
                self.cid_local = self.rng.randbytes(self.cfg.cid_len)
            return self.cid_local
        if self.cfg.offer_cid:
            return b""  # "I send CIDs but do not need to receive them"
        return None

    def _send_early_data(self) -> list:
        secret = self.ks.derive_early_traffic(self._th())
        self._install(EPOCH_EARLY, "write", secret)
        rec = self._seal(EPOCH_EARLY, ContentType.APPLICATION_DATA, self.cfg.early_payload)
        return [OutRecord(rec, "early_data")]

    # -------------------------------------------------------------- receive path

    def handle(self, data: bytes, now: int) -> list:
        """Feed one datagram (DTLS) or stream chunk (TLS)."""
        self._now = now
        if self.phase == Phase.FAILED:
            return []
        try:
            if self.protocol == Protocol.TLS:
                return self._handle_stream(data, now)
            return self._handle_datagram(data, now)
        except ProtocolError as exc:
            return self._fail(now, exc)

    def _handle_stream(self, data: bytes, now: int) -> list:
        self._stream_buf += data
        out = []
        while self.phase != Phase.FAILED:
            if len(self._stream_buf) < records.TLS_RECORD_HEADER_LEN:
                break
            total = records.TLS_RECORD_HEADER_LEN + records.tls_record_length(self._stream_buf)
            if len(self._stream_buf) < total:
                break
            record = self._stream_buf[:total]
            self._stream_buf = self._stream_buf[total:]
            out.extend(self._handle_tls_record(record, now))
        return out

    def _handle_tls_record(self, record: bytes, now: int) -> list:
        outer = record[0]
        payload = record[5:]
        if outer == ContentType.CHANGE_CIPHER_SPEC:
            return []  # compat artifact: ignored, zero crypto operations
        if outer == ContentType.ALERT:
            self._peer_alert(now, payload[1] if len(payload) > 1 else -1)
            return []
        if outer == ContentType.HANDSHAKE:
            return self._feed_handshake_stream(payload, now)
        if outer != ContentType.APPLICATION_DATA:
            raise DecodeError(f"unexpected outer type {outer}")
        epoch = self._tls_read_epoch
        if epoch == EPOCH_PLAIN or "read" not in self.epochs.get(epoch, {}):
            raise UnexpectedMessage("protected record before any keys")
        keys = self.epochs[epoch]["read"]
        self.counters.aead_open += 1
        true_type, inner = records.open_tls(self.params, keys, record)
        self.auth_reads += 1
        return self._dispatch_record_payload(epoch, true_type, inner, now, rec_num=None)

    def _handle_datagram(self, data: bytes, now: int) -> list:
        out = []
        offset = 0
        while offset < len(data) and self.phase != Phase.FAILED:
            first = data[offset]
            if records.is_unified_header(first):
                try:
                    parsed = records.parse_unified(data, offset, len(self.cid_local or b""))
                except DecodeError:
                    break  # malformed tail: drop the rest of the datagram
                offset += parsed.consumed
                out.extend(self._handle_unified(parsed, now))
            elif first in (
                ContentType.HANDSHAKE,
                ContentType.ALERT,
                ContentType.CHANGE_CIPHER_SPEC,
            ):
                try:
                    ctype, seq, payload, used = records.parse_dtls_plaintext(data, offset)
                except DecodeError:
                    break
                offset += used
                if ctype == ContentType.ALERT:
                    self._peer_alert(now, payload[1] if len(payload) > 1 else -1)
                    continue
                if ctype == ContentType.CHANGE_CIPHER_SPEC:
                    continue
                if self.plain_window.seen(seq):
                    self._note_stale(now, (EPOCH_PLAIN, seq))
                    continue
                self.plain_window.add(seq)
                out.extend(self._feed_dtls_fragments(payload, now, rec_num=(EPOCH_PLAIN, seq)))
            else:
                break  # unknown first byte: not a record, drop remainder
        out.extend(self._flush_acks(now))
        return out

    def _handle_unified(self, parsed, now: int) -> list:
        epoch = self._match_epoch(parsed.epoch_low)
        if epoch is None or "read" not in self.epochs.get(epoch, {}):
            return []  # no keys for that epoch (e.g. rejected early data)
        if parsed.cid and self.cid_local and parsed.cid != self.cid_local:
            return []  # not our connection id
        keys = self.epochs[epoch]["read"]
        window = self.windows[epoch]
        try:
            self.counters.aead_open += 1
            seq, true_type, inner = records.open_dtls(self.params, keys, window, parsed)
        except ProtocolError:
            return []  # bad or replayed datagrams are dropped, never fatal
        self.auth_reads += 1
        return self._dispatch_record_payload(epoch, true_type, inner, now, rec_num=(epoch, seq))

    def _match_epoch(self, epoch_low: int):
        for epoch in self.epochs:
            if epoch != EPOCH_PLAIN and epoch % 4 == epoch_low:
                return epoch
        return None

    def _dispatch_record_payload(self, epoch, true_type, payload, now, rec_num) -> list:
        if true_type == ContentType.HANDSHAKE:
            if self.protocol == Protocol.TLS:
                return self._feed_handshake_stream(payload, now)
            return self._feed_dtls_fragments(payload, now, rec_num)
        if true_type == ContentType.ACK:
            self._process_ack(messages.parse_ack(payload))
            return []
        if true_type == ContentType.ALERT:
            self._peer_alert(now, payload[1] if len(payload) > 1 else -1)
            return []
        if true_type == ContentType.APPLICATION_DATA:
            return self._handle_app_payload(epoch, payload, now)
        raise UnexpectedMessage(f"inner content type {true_type}")

    def _handle_app_payload(self, epoch: int, payload: bytes, now: int) -> list:
        if epoch == EPOCH_EARLY:
            if self.role != "server":
                raise UnexpectedMessage("early data sent to a client")
            if not self.early_accepted:
                return []  # rejected 0-RTT: deprotected and discarded
            self._event(now, EventKind.EARLY_DATA, bytes=len(payload), replay_uncertain=True)
            return []
        allowed = self.connected or (self.role == "server" and self.phase == Phase.WAIT_FINISHED)
        if not allowed:
            raise UnexpectedMessage("application data before the handshake allows it")
        self._event(now, EventKind.APP_DATA, bytes=len(payload))
        return []

    # --------------------------------------------------- handshake msg plumbing

    def _feed_handshake_stream(self, data: bytes, now: int) -> list:
        self._hs_buf += data
        out = []
        while len(self._hs_buf) >= 4 and self.phase != Phase.FAILED:
            total = 4 + int.from_bytes(self._hs_buf[1:4], "big")
            if len(self._hs_buf) < total:
                break
            raw = self._hs_buf[:total]
            self._hs_buf = self._hs_buf[total:]
            msg = messages.decode_handshake(raw)
            out.extend(self._dispatch_message(msg, raw, now))
        return out

    def _feed_dtls_fragments(self, payload: bytes, now: int, rec_num) -> list:
        out = []
        offset = 0
        got_new = False
        while offset < len(payload):
            frag, used = messages.parse_dtls_fragment(payload[offset:])
            offset += used
            if frag.message_seq < self.next_recv_msg_seq:
                self._note_stale(now, rec_num)
                continue
            buf = self.inbound_frags.get(frag.message_seq)
            if buf is None:
                buf = messages.FragmentBuffer(frag.msg_type, frag.length, frag.message_seq)
                self.inbound_frags[frag.message_seq] = buf
            buf.add(frag)
            got_new = True
            if rec_num is not None and rec_num not in self.recv_flight:
                self.recv_flight.append(rec_num)
        while self.phase != Phase.FAILED:
            buf = self.inbound_frags.get(self.next_recv_msg_seq)
            if buf is None or not buf.complete:
                break
            full = buf.assemble()
            del self.inbound_frags[self.next_recv_msg_seq]
            self.next_recv_msg_seq += 1
            raw = messages.decode_dtls_fragment(full).to_tls_form()
            msg = messages.decode_handshake(raw)
            out.extend(self._dispatch_message(msg, raw, now))
        if got_new and self.inbound_frags and self.ack_at is None:
            self.ack_at = now + ACK_DELAY_MS  # incomplete flight: delayed ACK
        return out

    def _note_stale(self, now: int, rec_num) -> None:
        # Peer retransmitted something we already processed; re-ACK promptly
        # so it stops resending.
        if self.protocol == Protocol.DTLS:
            if rec_num is not None and rec_num not in self.stale_records:
                self.stale_records.append(rec_num)
            self.ack_at = now

    def _flush_acks(self, now: int) -> list:
        if self.ack_at is None or now < self.ack_at:
            return []
        self.ack_at = None
        acks = list(self.recv_flight) + self.stale_records
        self.stale_records = []
        return self._send_ack(acks)

    def _implicit_ack(self) -> None:
        """An in-order message from the peer's next flight proves our
        previous flight arrived whole."""
        self.sent_unacked.clear()
        self.retransmit_at = None
        self.rto_ms = RTO_INITIAL_MS
        self.retries = 0

    def _process_ack(self, record_numbers) -> None:
        for rn in record_numbers:
            self.sent_unacked.pop(tuple(rn), None)  # unknown numbers ignored
        if not self.sent_unacked:
            self.retransmit_at = None
            self.rto_ms = RTO_INITIAL_MS
            self.retries = 0

    # ---------------------------------------------------------- timers

    def next_timeout(self):
        candidates = [t for t in (self.retransmit_at, self.ack_at) if t is not None]
        return min(candidates) if candidates else None

    def on_timeout(self, now: int) -> list:
        if self.phase == Phase.FAILED:
            return []
        self._now = now
        out = []
        if self.ack_at is not None and now >= self.ack_at:
            self.ack_at = None
            out.extend(self._send_ack(list(self.recv_flight) + self.stale_records))
            self.stale_records = []
        if self.retransmit_at is not None and now >= self.retransmit_at:
            if self.retries >= RTO_MAX_RETRIES:
                out.extend(self._fail(now, HandshakeTimeout("retransmission cap reached")))
                return out
            self.retries += 1
            self.rto_ms *= 2
            self.retransmit_at = now + self.rto_ms
            pending = sorted(self.sent_unacked.items(), key=lambda kv: kv[1]["msg_seq"])
            for old_key, entry in pending:
                del self.sent_unacked[old_key]
                out.append(
                    self._send_dtls_fragment(
                        entry["frag"], entry["name"], entry["epoch"], entry["msg_seq"],
                        track=True, retransmit=True,
                    )
                )
        return out

    # ---------------------------------------------------------- dispatch table

    def _dispatch_message(self, msg, raw: bytes, now: int) -> list:
        if self.role == "client":
            return self._client_message(msg, raw, now)
        return self._server_message(msg, raw, now)

    # -- client message handling ------------------------------------------------

    def _client_message(self, msg, raw: bytes, now: int) -> list:
        t = msg.MSG_TYPE
        if self.phase == Phase.WAIT_SH and t == HandshakeType.SERVER_HELLO:
            self._implicit_ack()
            if messages.is_hello_retry_request(msg):
                return self._client_handle_hrr(msg, raw, now)
            return self._client_handle_sh(msg, raw, now)
        if self.phase == Phase.WAIT_EE and t == HandshakeType.ENCRYPTED_EXTENSIONS:
            return self._client_handle_ee(msg, raw, now)
        if self.phase == Phase.WAIT_CERT_CR and t == HandshakeType.CERTIFICATE_REQUEST:
            self.client_cert_requested = True
            self.transcript.append(raw)
            self.phase = Phase.WAIT_CV
            return []
        if self.phase in (Phase.WAIT_CERT_CR, Phase.WAIT_CV) and t == HandshakeType.CERTIFICATE:
            return self._client_handle_certificate(msg, raw, now)
        if self.phase == Phase.WAIT_CV and t == HandshakeType.CERTIFICATE_VERIFY:
            return self._client_handle_cv(msg, raw, now)
        if self.phase == Phase.WAIT_FINISHED and t == HandshakeType.FINISHED:
            return self._client_handle_finished(msg, raw, now)
        if self.connected and t == HandshakeType.NEW_SESSION_TICKET:
            return self._client_handle_ticket(msg, now)
        raise UnexpectedMessage(f"{HandshakeType(t).name} in phase {self.phase.value}")

    def _client_handle_hrr(self, hrr, raw: bytes, now: int) -> list:
        if self.hrr_done:
            raise UnexpectedMessage("second HelloRetryRequest")
        self.hrr_done = True
        cookie_ext = messages.find_extension(hrr.extensions, ExtensionType.COOKIE)
        if cookie_ext is None:
            raise UnexpectedMessage("HelloRetryRequest without a cookie")
        cookie = messages.parse_cookie(cookie_ext.data)
        # transcript restart: ClientHello1 collapses into message_hash
        ch1 = self.transcript[0]
        digest = crypto.hash_data(self.params.hash_alg, ch1)
        synthetic = bytes([crypto.MESSAGE_HASH_TYPE, 0, 0, len(digest)]) + digest
        self.transcript = [synthetic, raw]
        self.ks = None
        self.epochs.pop(EPOCH_EARLY, None)  # 0-RTT does not survive an HRR
        out = self._client_hello_flight(now, cookie=cookie)
        self._event(now, EventKind.FLIGHT_READY, flight="client_hello_retry")
        return out

    def _client_handle_sh(self, sh, raw: bytes, now: int) -> list:
        if sh.cipher_suite not in [int(s) for s in self.cfg.suites]:
            raise NoCommonSuite("server picked a suite we did not offer")
        psk_ext = messages.find_extension(sh.extensions, ExtensionType.PRE_SHARED_KEY)
        if sh.cipher_suite != int(self.suite):
            if psk_ext is not None:
                raise NoCommonSuite("PSK acceptance requires the PSK's suite")
            self.suite = SuiteId(sh.cipher_suite)
            self.params = crypto.suite_params(self.suite)
            self.ks = None
        self.transcript.append(raw)
        if psk_ext is None and self.psk_in_use is not None:
            # server declined the PSK: continue as a pure (EC)DHE handshake
            self.psk_in_use = None
            if self.cfg.mode == AuthMode.ZERO_RTT:
                raise UnexpectedMessage("0-RTT offer requires PSK acceptance")
            self.ks = None
        if self.ks is None:
            self.ks = KeySchedule(self.suite, self.protocol, self.counters)
            self.ks.init_early()

        dh = None
        share_ext = messages.find_extension(sh.extensions, ExtensionType.KEY_SHARE)
        if share_ext is not None:
            group, server_pub = messages.parse_key_share_server(share_ext.data)
            if self.dh_priv is None or group != int(self.dh_priv.group):
                raise NoCommonGroup("server share for a group we did not offer")
            dh = self._shared(self.dh_priv, server_pub)
            self.dh_secret = dh
        elif self.cfg.mode in (AuthMode.PK_MUTUAL, AuthMode.PK_SERVER_ONLY, AuthMode.PSK_ECDHE):
            raise UnexpectedMessage("expected a key_share in ServerHello")

        cid_ext = messages.find_extension(sh.extensions, ExtensionType.CONNECTION_ID)
        if cid_ext is not None:
            self.cid_peer = messages.parse_connection_id(cid_ext.data) or None

        self.ks.advance_handshake(dh, self._th())
        self._install(EPOCH_HANDSHAKE, "read", self.ks.server_hs_traffic)
        self._install(EPOCH_HANDSHAKE, "write", self.ks.client_hs_traffic)
        self._tls_read_epoch = EPOCH_HANDSHAKE
        self.phase = Phase.WAIT_EE
        return []

    def _client_handle_ee(self, ee, raw: bytes, now: int) -> list:
        self.transcript.append(raw)
        accepted = messages.find_extension(ee.extensions, ExtensionType.EARLY_DATA) is not None
        if accepted and self.cfg.mode != AuthMode.ZERO_RTT:
            raise UnexpectedMessage("server accepted early data we never sent")
        self.early_accepted = accepted
        self.early_rejected = self.cfg.mode == AuthMode.ZERO_RTT and not accepted
        self.phase = Phase.WAIT_FINISHED if self.psk_in_use is not None else Phase.WAIT_CERT_CR
        return []

    def _client_handle_certificate(self, cert, raw: bytes, now: int) -> list:
        if not cert.entries:
            raise UnexpectedMessage("empty server Certificate")
        self.transcript.append(raw)
        self.phase = Phase.WAIT_CV
        return []

    def _client_handle_cv(self, cv, raw: bytes, now: int) -> list:
        content = messages.certificate_verify_content("server", self._th())
        anchor = self.cfg.peer_ec
        if anchor is None or not self._verify(
            anchor.public_point, crypto.SignatureScheme(cv.scheme), content, cv.signature
        ):
            raise BadSignature("server CertificateVerify did not verify")
        self.transcript.append(raw)
        self.phase = Phase.WAIT_FINISHED
        return []

    def _client_handle_finished(self, fin, raw: bytes, now: int) -> list:
        if not self.ks.verify_finished(self.ks.server_hs_traffic, self._th(), fin.verify_data):
            raise BadFinished("server Finished MAC mismatch")
        self.transcript.append(raw)
        self.ks.advance_master(self._th())
        self._install(EPOCH_APP, "read", self.ks.server_ap_traffic)

        out = []
        if self.protocol == Protocol.TLS and self.cfg.compat and not self._ccs_sent:
            out.append(self._fake_ccs())
            self._ccs_sent = True
        if self.early_accepted and self.protocol == Protocol.TLS:
            out.extend(self._emit_handshake([(messages.build_end_of_early_data(), EPOCH_EARLY)], now))
        flight = []
        if self.client_cert_requested:
            flight.extend(self._client_cert_flight())
        mac_input = self._th([messages.tls_form(m) for m, _ in flight])
        fin_msg = messages.build_finished(self.ks.finished_mac(self.ks.client_hs_traffic, mac_input))
        flight.append((fin_msg, EPOCH_HANDSHAKE))
        out.extend(self._emit_handshake(flight, now))
        self._install(EPOCH_APP, "write", self.ks.client_ap_traffic)
        self.ks.derive_resumption(self._th())
        self._tls_read_epoch = EPOCH_APP
        self.recv_flight = []
        self.phase = Phase.CONNECTED
        self._event(now, EventKind.FLIGHT_READY, flight="client_second")
        self._event(now, EventKind.HANDSHAKE_COMPLETE)
        return out

    def _client_cert_flight(self) -> list:
        cred = self.cfg.local_ec
        if cred is None:
            raise ConfigConflict("client certificate requested but not configured")
        cert = messages.build_certificate(b"", [cred.cert_der])
        th = self._th([messages.tls_form(cert)])
        cv = messages.build_certificate_verify(
            int(cred.scheme), self._sign(cred, messages.certificate_verify_content("client", th))
        )
        return [(cert, EPOCH_HANDSHAKE), (cv, EPOCH_HANDSHAKE)]

    def _client_handle_ticket(self, nst, now: int) -> list:
        ext = messages.find_extension(nst.extensions, ExtensionType.EARLY_DATA)
        state = TicketState(
            ticket=nst.ticket,
            psk=self.ks.resumption_psk(nst.nonce),
            suite=self.suite,
            age_add=nst.age_add,
            received_at=now,
            lifetime_s=nst.lifetime,
            max_early_data=int.from_bytes(ext.data, "big") if ext else 0,
        )
        self.client_tickets.append(state)
        self._event(now, EventKind.TICKET, ticket=nst.ticket.hex())
        if self.protocol == Protocol.DTLS:
            self.ack_at = now  # no responding flight: explicit ACK
        return []

    # ---------------------------------------------------------------- server side

    def _server_message(self, msg, raw: bytes, now: int) -> list:
        t = msg.MSG_TYPE
        if t == HandshakeType.CLIENT_HELLO:
            if self.phase != Phase.START or self.protocol != Protocol.TLS:
                raise UnexpectedMessage("ClientHello at the wrong time")
            return self.server_handle_client_hello(msg, raw, now)
        if self.phase == Phase.WAIT_CERT_CR and t == HandshakeType.CERTIFICATE:
            self._implicit_ack()
            if not msg.entries:
                raise UnexpectedMessage("client sent an empty Certificate")
            self.transcript.append(raw)
            self.phase = Phase.WAIT_CV
            return []
        if self.phase == Phase.WAIT_CV and t == HandshakeType.CERTIFICATE_VERIFY:
            content = messages.certificate_verify_content("client", self._th())
            anchor = self.cfg.peer_ec
            if anchor is None or not self._verify(
                anchor.public_point, crypto.SignatureScheme(msg.scheme), content, msg.signature
            ):
                raise BadSignature("client CertificateVerify did not verify")
            self.transcript.append(raw)
            self.phase = Phase.WAIT_FINISHED
            return []
        if self.phase == Phase.WAIT_FINISHED and t == HandshakeType.END_OF_EARLY_DATA:
            if not (self.early_accepted and self.protocol == Protocol.TLS):
                raise UnexpectedMessage("EndOfEarlyData without accepted 0-RTT")
            self.transcript.append(raw)
            self._tls_read_epoch = EPOCH_HANDSHAKE
            return []
        if self.phase == Phase.WAIT_FINISHED and t == HandshakeType.FINISHED:
            return self._server_handle_finished(msg, raw, now)
        raise UnexpectedMessage(f"{HandshakeType(t).name} in phase {self.phase.value}")

    def server_handle_client_hello(self, ch, raw: bytes, now: int, retry_transcript=None, ch_rec_seq: int = 0) -> list:
        """Entered once the listener's cookie policy has been satisfied."""
        self._now = now
        if retry_transcript is not None:
            self.transcript = list(retry_transcript)
            self.next_send_msg_seq = 1  # the HelloRetryRequest consumed seq 0
            self.next_recv_msg_seq = 2  # ClientHello1 and the retry
            self.plain_write_seq = 1  # the stateless HRR used record seq 0
            self.plain_window.add(0)
        elif self.protocol == Protocol.DTLS:
            self.next_recv_msg_seq = 1
        if self.protocol == Protocol.DTLS:
            self.plain_window.add(ch_rec_seq)
        self.transcript.append(raw)
        self.recv_flight = []

        self.suite = SuiteId(
            _negotiate([int(s) for s in self.cfg.suites], ch.cipher_suites, NoCommonSuite, "cipher suite")
        )
        self.params = crypto.suite_params(self.suite)

        share = None
        share_ext = messages.find_extension(ch.extensions, ExtensionType.KEY_SHARE)
        if share_ext is not None:
            for group, pub in messages.parse_key_share_client(share_ext.data):
                if group in [int(g) for g in self.cfg.groups]:
                    share = (crypto.NamedGroup(group), pub)
                    break
            if share is None:
                raise NoCommonGroup("no offered key-share group is enabled here")

        psk = self._server_select_psk(ch, raw, now, fallback_possible=share is not None)
        mode = self._server_mode(psk, share)
        self.negotiated_mode = mode

        cid_ext = messages.find_extension(ch.extensions, ExtensionType.CONNECTION_ID)
        if cid_ext is not None:
            self.peer_offered_cid = True
            self.cid_peer = messages.parse_connection_id(cid_ext.data) or None

        dh = None
        key_share_entry = None
        if mode in (AuthMode.PK_MUTUAL, AuthMode.PK_SERVER_ONLY, AuthMode.PSK_ECDHE):
            group, client_pub = share
            priv, pub = self._keypair(group)
            dh = self._shared(priv, client_pub)
            self.dh_secret = dh
            key_share_entry = (int(group), pub)

        if psk is None:
            self.ks = KeySchedule(self.suite, self.protocol, self.counters)
            self.ks.init_early()

        sh = messages.build_server_hello(
            self.rng.randbytes(32),
            ch.legacy_session_id,
            int(self.suite),
            key_share_entry=key_share_entry,
            selected_psk=0 if psk is not None else None,
            cid=self._advertised_cid() if self.peer_offered_cid else None,
        )
        out = self._emit_handshake([(sh, EPOCH_PLAIN)], now)
        self.ks.advance_handshake(dh, self._th())
        self._install(EPOCH_HANDSHAKE, "write", self.ks.server_hs_traffic)
        self._install(EPOCH_HANDSHAKE, "read", self.ks.client_hs_traffic)
        if self.protocol == Protocol.TLS and self.cfg.compat:
            out.append(self._fake_ccs())
            self._ccs_sent = True

        flight = []
        ee_exts = [messages.ext_early_data()] if self.early_accepted else []
        flight.append((messages.EncryptedExtensions(ee_exts), EPOCH_HANDSHAKE))
        if mode == AuthMode.PK_MUTUAL:
            flight.append(
                (messages.build_certificate_request([int(s) for s in self._scheme_list()]), EPOCH_HANDSHAKE)
            )
            self.client_cert_requested = True
        if mode in (AuthMode.PK_MUTUAL, AuthMode.PK_SERVER_ONLY):
            cred = self.cfg.local_ec
            cert = messages.build_certificate(b"", [cred.cert_der])
            flight.append((cert, EPOCH_HANDSHAKE))
            th = self._th([messages.tls_form(m) for m, _ in flight])
            cv = messages.build_certificate_verify(
                int(cred.scheme),
                self._sign(cred, messages.certificate_verify_content("server", th)),
            )
            flight.append((cv, EPOCH_HANDSHAKE))
        mac_input = self._th([messages.tls_form(m) for m, _ in flight])
        fin = messages.build_finished(self.ks.finished_mac(self.ks.server_hs_traffic, mac_input))
        flight.append((fin, EPOCH_HANDSHAKE))
        out.extend(self._emit_handshake(flight, now))

        self.ks.advance_master(self._th())
        self._install(EPOCH_APP, "write", self.ks.server_ap_traffic)
        if self.early_accepted and self.protocol == Protocol.TLS:
            self._tls_read_epoch = EPOCH_EARLY
        else:
            self._tls_read_epoch = EPOCH_HANDSHAKE
        self.phase = Phase.WAIT_CERT_CR if mode == AuthMode.PK_MUTUAL else Phase.WAIT_FINISHED
        self._event(now, EventKind.FLIGHT_READY, flight="server_first")
        return out

    def _server_select_psk(self, ch, raw_ch: bytes, now: int, fallback_possible: bool):
        ext = messages.find_extension(ch.extensions, ExtensionType.PRE_SHARED_KEY)
        if ext is None:
            return None
        identity, obf_age, binder = messages.parse_pre_shared_key_offer(ext.data)
        resumed = self.listener.ticket_db.get(identity) if self.listener else None
        try:
            if resumed is not None:
                if now - resumed["issued_at"] > resumed["lifetime_s"] * 1000:
                    del self.listener.ticket_db[identity]
                    raise ExpiredTicket("resumption ticket past its lifetime")
                psk_secret, kind = resumed["psk"], PskKind.RESUMPTION
            elif self.cfg.psk is not None and identity == self.cfg.psk.identity:
                psk_secret, kind = self.cfg.psk.secret, PskKind.EXTERNAL
            else:
                raise UnknownTicket("psk identity is neither configured nor a ticket")
        except (ExpiredTicket, UnknownTicket):
            if fallback_possible and self.cfg.local_ec is not None:
                return None  # fall back to the certificate path
            raise

        self.ks = KeySchedule(self.suite, self.protocol, self.counters)
        self.ks.init_early(psk_secret, kind)
        trunc = raw_ch[: len(raw_ch) - messages.psk_binders_trailer_len(self.params.hash_len)]
        th = crypto.transcript_hash(self.transcript[:-1] + [trunc], self.params.hash_alg)
        if not crypto.hmac_verify(
            self.params.hash_alg, self.ks.finished_key(self.ks.binder_key), th, binder
        ):
            raise BadBinder("psk binder mismatch")
        self.psk_in_use = PskCredential(identity, psk_secret)
        self.psk_kind_in_use = kind

        wants_early = messages.find_extension(ch.extensions, ExtensionType.EARLY_DATA) is not None
        if wants_early and self.cfg.accept_early:
            fresh = True
            if resumed is not None:
                real_age = (obf_age - resumed["age_add"]) & 0xFFFFFFFF
                fresh = abs(real_age - (now - resumed["issued_at"])) <= TICKET_AGE_TOLERANCE_MS
            if fresh:
                self.early_accepted = True
                secret = self.ks.derive_early_traffic(self._th())
                self._install(EPOCH_EARLY, "read", secret)
        return self.psk_in_use

    def _server_mode(self, psk, share) -> AuthMode:
        if psk is not None:
            return AuthMode.PSK_ECDHE if share is not None else AuthMode.PSK
        if self.cfg.local_ec is None:
            raise NoCommonSuite("no PSK accepted and no certificate configured")
        if share is None:
            raise NoCommonGroup("certificate mode requires a client key share")
        return AuthMode.PK_MUTUAL if self.cfg.mutual else AuthMode.PK_SERVER_ONLY

    def _server_handle_finished(self, fin, raw: bytes, now: int) -> list:
        self._implicit_ack()
        if not self.ks.verify_finished(self.ks.client_hs_traffic, self._th(), fin.verify_data):
            raise BadFinished("client Finished MAC mismatch")
        self.transcript.append(raw)
        self._install(EPOCH_APP, "read", self.ks.client_ap_traffic)
        self.ks.derive_resumption(self._th())
        self._tls_read_epoch = EPOCH_APP
        self.phase = Phase.CONNECTED
        self._event(now, EventKind.HANDSHAKE_COMPLETE)
        out = []
        if self.protocol == Protocol.DTLS:
            out.extend(self._send_ack(list(self.recv_flight)))
            self.recv_flight = []
            self.ack_at = None
        if self.cfg.tickets:
            out.extend(self._issue_ticket(now))
        return out

    def _issue_ticket(self, now: int) -> list:
        nonce = self.ticket_nonce_counter.to_bytes(8, "big")
        self.ticket_nonce_counter += 1
        ticket_id = self.rng.randbytes(16)
        age_add = self.rng.getrandbits(32)
        psk = self.ks.resumption_psk(nonce)
        if self.listener is not None:
            self.listener.ticket_db[ticket_id] = {
                "psk": psk,
                "suite": self.suite,
                "issued_at": now,
                "age_add": age_add,
                "lifetime_s": TICKET_LIFETIME_S,
            }
        nst = messages.build_new_session_ticket(
            TICKET_LIFETIME_S, age_add, nonce, ticket_id, max_early_data=1 << 14
        )
        self._event(now, EventKind.TICKET, ticket=ticket_id.hex())
        return self._emit_handshake([(nst, EPOCH_APP)], now)

    # ----------------------------------------------------------------- app data

    def send_app_data(self, payload: bytes, now: int) -> list:
        self._now = now
        if not self.connected:
            raise NotReady("application data before the handshake allows it")
        return [OutRecord(self._seal(EPOCH_APP, ContentType.APPLICATION_DATA, payload), "app_data")]


def client_start(cfg: ConnConfig, rng: random.Random, now: int = 0):
    conn = Connection(cfg, "client", rng, conn_id="C")
    return conn, conn.start(now)


def resume_config(cfg: ConnConfig, ticket: TicketState) -> ConnConfig:
    """Client config for a resumed handshake using a stored ticket."""
    return replace(cfg, resume=ticket, psk=None, suites=(ticket.suite,))


class ServerListener:
    """Owns the accept path: cookie secrets, ticket table, demux tables."""

    def __init__(self, cfg: ConnConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng
        self.cookie_secret = rng.randbytes(32)
        self.prev_cookie_secret: bytes | None = None
        self.rotation_epoch = 0
        self.ticket_db: dict = {}
        self.by_addr: dict = {}
        self.by_cid: dict = {}
        self._conn_counter = 0
        self._stateless_hrr_count = 0

    # -- cookie machinery ------------------------------------------------------

    def rotate_cookie_secret(self) -> None:
        self.prev_cookie_secret = self.cookie_secret
        self.cookie_secret = self.rng.randbytes(32)
        self.rotation_epoch = (self.rotation_epoch + 1) & 0xFF

    def mint_cookie(self, address: str, ch_hash: bytes) -> bytes:
        # rotation byte + Hash(ClientHello1) + MAC(address || Hash(ClientHello1));
        # embedding the hash keeps the retry transcript reconstructible with
        # zero server-side state.
        mac = crypto.hmac_digest(
            crypto.HashAlg.SHA256, self.cookie_secret, address.encode() + ch_hash
        )
        return bytes([self.rotation_epoch]) + ch_hash + mac

    def check_cookie(self, cookie: bytes, address: str, hash_len: int):
        """Returns the embedded Hash(ClientHello1) when valid, else None."""
        if len(cookie) != 1 + hash_len + 32:
            return None
        rot, ch_hash, mac = cookie[0], cookie[1 : 1 + hash_len], cookie[1 + hash_len :]
        if rot == self.rotation_epoch:
            secret = self.cookie_secret
        elif self.prev_cookie_secret is not None and rot == (self.rotation_epoch - 1) & 0xFF:
            secret = self.prev_cookie_secret
        else:
            return None
        expect = crypto.hmac_digest(crypto.HashAlg.SHA256, secret, address.encode() + ch_hash)
        return ch_hash if expect == mac else None

    @property
    def allocated(self) -> int:
        return self._conn_counter

    @property
    def stateless_hrr_count(self) -> int:
        return self._stateless_hrr_count

    def connections(self) -> list:
        seen = {}
        for conn in self.by_addr.values():
            seen[id(conn)] = conn
        return list(seen.values())

    # -- accept / demux -----------------------------------------------------------

    def receive(self, data: bytes, source: str, now: int) -> list:
        if self.cfg.protocol == Protocol.TLS:
            conn = self.by_addr.get(source)
            if conn is not None and conn.connected and data[:1] == bytes([ContentType.HANDSHAKE]):
                del self.by_addr[source]  # a fresh stream handshake starts over
                conn = None
            if conn is None:
                conn = self._fresh_connection(source)
            return conn.handle(data, now)
        if data and records.is_unified_header(data[0]) and (data[0] & 0x10):
            return self._route_by_cid(data, source, now)
        conn = self.by_addr.get(source)
        if conn is not None:
            if conn.connected and data and data[0] == ContentType.HANDSHAKE:
                # a plaintext flight from an established address starts over
                # (e.g. a resumption attempt); retire the old binding
                del self.by_addr[source]
                if conn.cid_local:
                    self.by_cid.pop(conn.cid_local, None)
                return self._accept_datagram(data, source, now)
            return conn.handle(data, now)
        return self._accept_datagram(data, source, now)

    def _route_by_cid(self, data: bytes, source: str, now: int) -> list:
        cid = bytes(data[1 : 1 + self.cfg.cid_len])
        conn = self.by_cid.get(cid)
        if conn is None:
            return []  # unknown-cid: dropped
        reads_before = conn.auth_reads
        out = conn.handle(data, now)
        if conn.auth_reads > reads_before and self.by_addr.get(source) is not conn:
            # authenticated record from a new source: move the binding
            for addr in [a for a, c in self.by_addr.items() if c is conn]:
                del self.by_addr[addr]
            self.by_addr[source] = conn
            conn._event(now, EventKind.ADDRESS_MIGRATED, address=source)
        return out

    def _fresh_connection(self, source: str):
        self._conn_counter += 1
        conn = Connection(self.cfg, "server", self.rng, conn_id=f"S{self._conn_counter}")
        conn.listener = self
        self.by_addr[source] = conn
        if self.cfg.cid_len:
            conn.cid_local = self.rng.randbytes(self.cfg.cid_len)
            self.by_cid[conn.cid_local] = conn
        return conn

    def _accept_datagram(self, data: bytes, source: str, now: int) -> list:
        """Datagram from an unknown address: DTLS cookie policy applies."""
        try:
            ctype, ch_rec_seq, payload, used = records.parse_dtls_plaintext(data, 0)
            if ctype != ContentType.HANDSHAKE:
                return []
            frag, _ = messages.parse_dtls_fragment(payload)
            if frag.msg_type != HandshakeType.CLIENT_HELLO or not frag.complete:
                return []
            raw = frag.to_tls_form()
            ch = messages.decode_handshake(raw)
        except ProtocolError:
            return []  # not a plausible first flight: silently dropped

        try:
            suite = crypto.suite_params(
                SuiteId(_negotiate([int(s) for s in self.cfg.suites], ch.cipher_suites, NoCommonSuite, "suite"))
            )
        except ProtocolError:
            return []

        retry_transcript = None
        if self.cfg.dos:
            cookie_ext = messages.find_extension(ch.extensions, ExtensionType.COOKIE)
            if cookie_ext is None:
                return [self._stateless_hrr(raw, ch, suite, source)]
            cookie = messages.parse_cookie(cookie_ext.data)
            ch1_hash = self.check_cookie(cookie, source, suite.hash_len)
            if ch1_hash is None:
                return []  # bad-cookie: silently dropped, nothing allocated
            synthetic = bytes([crypto.MESSAGE_HASH_TYPE, 0, 0, len(ch1_hash)]) + ch1_hash
            hrr = messages.build_hello_retry_request(
                int(suite.suite), cookie, ch.legacy_session_id
            )
            retry_transcript = [synthetic, messages.tls_form(hrr)]

        conn = self._fresh_connection(source)
        try:
            out = conn.server_handle_client_hello(
                ch, raw, now, retry_transcript=retry_transcript, ch_rec_seq=ch_rec_seq
            )
        except ProtocolError as exc:
            return conn._fail(now, exc)
        if used < len(data):
            out.extend(conn.handle(data[used:], now))  # e.g. 0-RTT in the same datagram
        return out

    def _stateless_hrr(self, raw_ch: bytes, ch, suite, source: str) -> OutRecord:
        ch_hash = crypto.hash_data(suite.hash_alg, raw_ch)
        cookie = self.mint_cookie(source, ch_hash)
        hrr = messages.build_hello_retry_request(int(suite.suite), cookie, ch.legacy_session_id)
        body = messages.tls_form(hrr)
        frag = messages.DtlsFragment(
            HandshakeType.SERVER_HELLO, len(body) - 4, 0, 0, len(body) - 4, body[4:]
        ).encode()
        record = records.encode_dtls_plaintext(ContentType.HANDSHAKE, 0, frag)
        self._stateless_hrr_count += 1
        return OutRecord(record, "hello_retry_request")
