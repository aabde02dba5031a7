"""The TLS/DTLS 1.3 secret tree.

One instance per connection.  Stages advance strictly
fresh -> early -> handshake -> master; reading a secret before its
stage raises WrongStage.  All transcript inputs are digests computed
by the caller, so the schedule itself stays byte-oriented and pure.
"""

from enum import Enum, IntEnum

from . import crypto
from .crypto import Protocol
from .errors import SequenceOverflow, WrongStage

SEQ_LIMIT = 1 << 48


class KsStage(IntEnum):
    FRESH = 0
    EARLY = 1
    HANDSHAKE = 2
    MASTER = 3


class PskKind(str, Enum):
    EXTERNAL = "external"
    RESUMPTION = "resumption"


class TrafficKeys:
    """Per-direction AEAD material for one epoch.

    sn_key exists only for DTLS (sequence-number masking).  Counters
    never decrease; hitting the 2^48 record ceiling is a hard error.
    """

    __slots__ = ("secret", "key", "iv", "sn_key", "read_seq", "write_seq")

    def __init__(self, secret: bytes, key: bytes, iv: bytes, sn_key: bytes | None):
        self.secret = secret
        self.key = key
        self.iv = iv
        self.sn_key = sn_key
        self.read_seq = 0
        self.write_seq = 0

    def next_write_seq(self) -> int:
        if self.write_seq >= SEQ_LIMIT:
            raise SequenceOverflow("write sequence space exhausted")
        seq = self.write_seq
        self.write_seq += 1
        return seq

    def note_read(self, seq: int) -> None:
        if seq >= SEQ_LIMIT:
            raise SequenceOverflow("read sequence space exhausted")
        if seq + 1 > self.read_seq:
            self.read_seq = seq + 1


# Standard keylog labels understood by external dissectors.
KEYLOG_EARLY = "CLIENT_EARLY_TRAFFIC_SECRET"
KEYLOG_CLIENT_HS = "CLIENT_HANDSHAKE_TRAFFIC_SECRET"
KEYLOG_SERVER_HS = "SERVER_HANDSHAKE_TRAFFIC_SECRET"
KEYLOG_CLIENT_AP = "CLIENT_TRAFFIC_SECRET_0"
KEYLOG_SERVER_AP = "SERVER_TRAFFIC_SECRET_0"
KEYLOG_EXPORTER = "EXPORTER_SECRET"


class KeySchedule:
    def __init__(self, suite_id, protocol: Protocol, counters=None):
        self.params = crypto.suite_params(suite_id)
        self.protocol = protocol
        self.stage = KsStage.FRESH
        self.counters = counters
        self._keylog = None
        self._client_random = b""
        self._empty_digest = crypto.hash_data(self.params.hash_alg, b"")
        self._secrets: dict[str, bytes] = {}

    # -- plumbing -----------------------------------------------------------

    def _count(self):
        if self.counters is not None:
            self.counters.hkdf_ops += 1

    def _extract(self, salt: bytes, ikm: bytes) -> bytes:
        self._count()
        return crypto.hkdf_extract(salt, ikm, self.params.hash_alg)

    def expand_label(self, secret: bytes, label: bytes, context: bytes, out_len: int) -> bytes:
        self._count()
        return crypto.hkdf_expand_label(
            secret, label, context, out_len, self.params.hash_alg, self.protocol
        )

    def derive_secret(self, secret: bytes, label: bytes, transcript_digest: bytes) -> bytes:
        return self.expand_label(secret, label, transcript_digest, self.params.hash_len)

    def _need(self, name: str, stage: KsStage) -> bytes:
        if self.stage < stage or name not in self._secrets:
            raise WrongStage(f"{name} not available at stage {self.stage.name}")
        return self._secrets[name]

    def _log(self, label: str, secret: bytes) -> None:
        if self._keylog is not None:
            self._keylog(f"{label} {self._client_random.hex()} {secret.hex()}")

    def set_keylog(self, writer, client_random: bytes) -> None:
        """Enable the debug keylog emitter (off by default)."""
        self._keylog = writer
        self._client_random = client_random

    @property
    def hash_len(self) -> int:
        return self.params.hash_len

    # -- named secrets (guarded by stage) ------------------------------------

    @property
    def early_secret(self) -> bytes:
        return self._need("early", KsStage.EARLY)

    @property
    def binder_key(self) -> bytes:
        return self._need("binder", KsStage.EARLY)

    @property
    def client_early_traffic_secret(self) -> bytes:
        return self._need("c_early", KsStage.EARLY)

    @property
    def handshake_secret(self) -> bytes:
        return self._need("handshake", KsStage.HANDSHAKE)

    @property
    def client_hs_traffic(self) -> bytes:
        return self._need("c_hs", KsStage.HANDSHAKE)

    @property
    def server_hs_traffic(self) -> bytes:
        return self._need("s_hs", KsStage.HANDSHAKE)

    @property
    def master_secret(self) -> bytes:
        return self._need("master", KsStage.MASTER)

    @property
    def client_ap_traffic(self) -> bytes:
        return self._need("c_ap", KsStage.MASTER)

    @property
    def server_ap_traffic(self) -> bytes:
        return self._need("s_ap", KsStage.MASTER)

    @property
    def exporter_master(self) -> bytes:
        return self._need("exporter", KsStage.MASTER)

    @property
    def resumption_master(self) -> bytes:
        return self._need("res_master", KsStage.MASTER)

    # -- stage transitions ----------------------------------------------------

    def init_early(self, psk: bytes | None = None, psk_kind: PskKind = PskKind.EXTERNAL):
        if self.stage != KsStage.FRESH:
            raise WrongStage("init_early on a non-fresh schedule")
        if psk is not None and len(psk) > 64:
            raise ValueError("psk longer than 64 bytes")
        ikm = psk if psk else bytes(self.params.hash_len)
        early = self._extract(b"", ikm)
        label = b"ext binder" if psk_kind == PskKind.EXTERNAL else b"res binder"
        self._secrets["early"] = early
        self._secrets["binder"] = self.derive_secret(early, label, self._empty_digest)
        self.stage = KsStage.EARLY
        return self

    def derive_early_traffic(self, th_client_hello: bytes) -> bytes:
        if self.stage != KsStage.EARLY:
            raise WrongStage("early traffic secret requires stage early")
        secret = self.derive_secret(self._secrets["early"], b"c e traffic", th_client_hello)
        self._secrets["c_early"] = secret
        self._log(KEYLOG_EARLY, secret)
        return secret

    def advance_handshake(self, dh_shared: bytes | None, th_through_server_hello: bytes):
        if self.stage != KsStage.EARLY:
            raise WrongStage("advance_handshake requires stage early")
        derived = self.derive_secret(self._secrets["early"], b"derived", self._empty_digest)
        ikm = dh_shared if dh_shared else bytes(self.params.hash_len)
        hs = self._extract(derived, ikm)
        self._secrets["handshake"] = hs
        th = th_through_server_hello
        self._secrets["c_hs"] = self.derive_secret(hs, b"c hs traffic", th)
        self._secrets["s_hs"] = self.derive_secret(hs, b"s hs traffic", th)
        self._log(KEYLOG_CLIENT_HS, self._secrets["c_hs"])
        self._log(KEYLOG_SERVER_HS, self._secrets["s_hs"])
        self.stage = KsStage.HANDSHAKE
        return self

    def advance_master(self, th_through_server_finished: bytes):
        if self.stage != KsStage.HANDSHAKE:
            raise WrongStage("advance_master requires stage handshake")
        derived = self.derive_secret(self._secrets["handshake"], b"derived", self._empty_digest)
        master = self._extract(derived, bytes(self.params.hash_len))
        self._secrets["master"] = master
        th = th_through_server_finished
        self._secrets["c_ap"] = self.derive_secret(master, b"c ap traffic", th)
        self._secrets["s_ap"] = self.derive_secret(master, b"s ap traffic", th)
        self._secrets["exporter"] = self.derive_secret(master, b"exp master", th)
        self._log(KEYLOG_CLIENT_AP, self._secrets["c_ap"])
        self._log(KEYLOG_SERVER_AP, self._secrets["s_ap"])
        self._log(KEYLOG_EXPORTER, self._secrets["exporter"])
        self.stage = KsStage.MASTER
        return self

    def derive_resumption(self, th_through_client_finished: bytes) -> bytes:
        if self.stage != KsStage.MASTER:
            raise WrongStage("resumption master requires stage master")
        secret = self.derive_secret(
            self._secrets["master"], b"res master", th_through_client_finished
        )
        self._secrets["res_master"] = secret
        return secret

    # -- derived material -------------------------------------------------------

    def traffic_keys(self, secret: bytes) -> TrafficKeys:
        if len(secret) != self.params.hash_len:
            raise ValueError("traffic secret has wrong length for suite")
        key = self.expand_label(secret, b"key", b"", self.params.key_len)
        iv = self.expand_label(secret, b"iv", b"", self.params.iv_len)
        sn_key = None
        if self.protocol == Protocol.DTLS:
            sn_key = self.expand_label(secret, b"sn", b"", self.params.key_len)
        return TrafficKeys(secret, key, iv, sn_key)

    def finished_key(self, base_secret: bytes) -> bytes:
        return self.expand_label(base_secret, b"finished", b"", self.params.hash_len)

    def finished_mac(self, base_secret: bytes, th: bytes) -> bytes:
        return crypto.hmac_digest(self.params.hash_alg, self.finished_key(base_secret), th)

    def verify_finished(self, base_secret: bytes, th: bytes, mac: bytes) -> bool:
        return crypto.hmac_verify(self.params.hash_alg, self.finished_key(base_secret), th, mac)

    def compute_binder(self, th_truncated_hello: bytes) -> bytes:
        if self.stage < KsStage.EARLY:
            raise WrongStage("binder requires stage early")
        key = self.finished_key(self._secrets["binder"])
        return crypto.hmac_digest(self.params.hash_alg, key, th_truncated_hello)

    def resumption_psk(self, ticket_nonce: bytes) -> bytes:
        base = self.resumption_master
        return self.expand_label(base, b"resumption", ticket_nonce, self.params.hash_len)

    def discard(self) -> None:
        """Drop all secrets; the instance is unusable afterwards."""
        self._secrets = {}
        self.stage = KsStage.FRESH
