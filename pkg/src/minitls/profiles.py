"""Named test profiles and credential handling.

The five profiles mirror the benchmark configurations: two PSK-only
builds, two certificate builds, and a ``full`` build with every feature
switched on.  Certificates are synthetic opaque blobs of configurable
size; peers verify CertificateVerify against out-of-band pinned public
keys, so no ASN.1 parsing exists anywhere.
"""

import random
from dataclasses import dataclass, field, replace
from enum import Enum

from .crypto import NamedGroup, SignatureScheme, SuiteId
from .errors import CredentialParseError, IllegalOverride, UnknownProfile


class AuthMode(str, Enum):
    PK_MUTUAL = "pk_mutual"
    PK_SERVER_ONLY = "pk_server_only"
    PSK = "psk"
    PSK_ECDHE = "psk_ecdhe"
    ZERO_RTT = "zero_rtt"


PSK_FAMILY = {AuthMode.PSK, AuthMode.PSK_ECDHE, AuthMode.ZERO_RTT}
PK_FAMILY = {AuthMode.PK_MUTUAL, AuthMode.PK_SERVER_ONLY}

GROUP_SCHEME = {
    NamedGroup.SECP256R1: SignatureScheme.ECDSA_SECP256R1_SHA256,
    NamedGroup.SECP521R1: SignatureScheme.ECDSA_SECP521R1_SHA512,
}


@dataclass(frozen=True)
class Profile:
    name: str
    suites: tuple
    modes: frozenset
    groups: tuple = ()
    cid: int | None = None
    compat_mode: bool = False
    zero_rtt: bool = False
    tickets: bool = False
    sni_hostname: str | None = None
    cert_size: int = 500
    max_key_shares: int = 1
    mutual_auth: bool = False


_PROFILES = {
    "psk128": Profile(
        name="psk128",
        suites=(SuiteId.AES_128_CCM_SHA256,),
        modes=frozenset({AuthMode.PSK}),
    ),
    "psk128_256": Profile(
        name="psk128_256",
        suites=(SuiteId.AES_128_CCM_SHA256, SuiteId.AES_256_CCM_SHA384),
        modes=frozenset({AuthMode.PSK}),
    ),
    "ecdsa128": Profile(
        name="ecdsa128",
        suites=(SuiteId.AES_128_CCM_SHA256,),
        modes=frozenset({AuthMode.PK_MUTUAL, AuthMode.PK_SERVER_ONLY}),
        groups=(NamedGroup.SECP256R1,),
        sni_hostname="iot.example",
        mutual_auth=True,
    ),
    "ecdsa128_256": Profile(
        name="ecdsa128_256",
        suites=(SuiteId.AES_128_CCM_SHA256, SuiteId.AES_256_CCM_SHA384),
        modes=frozenset({AuthMode.PK_MUTUAL, AuthMode.PK_SERVER_ONLY}),
        groups=(NamedGroup.SECP256R1, NamedGroup.SECP521R1),
        sni_hostname="iot.example",
        mutual_auth=True,
    ),
    # psk_ecdhe stays out of the default mode set here; it remains
    # reachable through an explicit modes override.
    "full": Profile(
        name="full",
        suites=(SuiteId.AES_128_CCM_SHA256, SuiteId.AES_256_CCM_SHA384),
        modes=frozenset(
            {AuthMode.PSK, AuthMode.PK_MUTUAL, AuthMode.PK_SERVER_ONLY, AuthMode.ZERO_RTT}
        ),
        groups=(NamedGroup.SECP256R1, NamedGroup.SECP521R1),
        compat_mode=True,
        zero_rtt=True,
        tickets=True,
        sni_hostname="iot.example",
        mutual_auth=True,
    ),
}

_OVERRIDABLE = {
    "suites",
    "modes",
    "groups",
    "cid",
    "compat_mode",
    "zero_rtt",
    "tickets",
    "sni_hostname",
    "cert_size",
    "mutual_auth",
}


def profile_names() -> list:
    return sorted(_PROFILES)


def resolve(name: str, overrides: dict | None = None) -> Profile:
    """Profile table entry with overrides applied and validated."""
    base = _PROFILES.get(name)
    if base is None:
        raise UnknownProfile(f"unknown profile {name!r}")
    if not overrides:
        return base
    unknown = set(overrides) - _OVERRIDABLE
    if unknown:
        raise IllegalOverride(f"not override knobs: {sorted(unknown)}")
    merged = dict(overrides)
    if "modes" in merged:
        merged["modes"] = frozenset(AuthMode(m) for m in merged["modes"])
    if "suites" in merged:
        merged["suites"] = tuple(SuiteId(s) for s in merged["suites"])
    if "groups" in merged:
        merged["groups"] = tuple(NamedGroup(g) for g in merged["groups"])
    prof = replace(base, **merged)
    _validate(base, prof)
    return prof


def _validate(base: Profile, prof: Profile) -> None:
    if base.name.startswith("psk") and prof.modes & PK_FAMILY:
        raise IllegalOverride("psk profiles permit no certificate modes")
    if base.name.startswith("ecdsa") and prof.modes & PSK_FAMILY:
        raise IllegalOverride("ecdsa profiles permit no PSK modes")
    if prof.zero_rtt and not (prof.modes & PSK_FAMILY):
        raise IllegalOverride("0-RTT requires a PSK-capable mode")
    if (prof.modes & PK_FAMILY or prof.modes & {AuthMode.PSK_ECDHE}) and not prof.groups:
        raise IllegalOverride("(EC)DHE modes need at least one named group")
    if prof.cid is not None and not 0 <= prof.cid <= 16:
        raise IllegalOverride("cid length must be 0..16")


# --- credentials -----------------------------------------------------------------


@dataclass(frozen=True)
class PskCredential:
    identity: bytes
    secret: bytes


@dataclass(frozen=True)
class EcCredential:
    group: NamedGroup
    private_value: int  # 0 when only the public half is known
    public_point: bytes
    cert_der: bytes = b""

    @property
    def scheme(self) -> SignatureScheme:
        return GROUP_SCHEME[self.group]


@dataclass
class CredentialStore:
    psks: list = field(default_factory=list)
    ec_keys: list = field(default_factory=list)
    cert_size: int = 500

    def find_psk(self, identity: bytes):
        for cred in self.psks:
            if cred.identity == identity:
                return cred
        return None

    def ec_for_group(self, group: NamedGroup):
        for cred in self.ec_keys:
            if cred.group == group:
                return cred
        return None


_CURVE_NAMES = {"p256": NamedGroup.SECP256R1, "p521": NamedGroup.SECP521R1}


def credential_store_load(path) -> CredentialStore:
    """Parse a credential file; any malformed line fails with its number."""
    store = CredentialStore()
    with open(path, "r", encoding="ascii") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            kind = fields[0]
            try:
                if kind == "psk":
                    if len(fields) != 3:
                        raise ValueError("psk needs identity and key")
                    store.psks.append(
                        PskCredential(bytes.fromhex(fields[1]), bytes.fromhex(fields[2]))
                    )
                elif kind == "eckey":
                    if len(fields) != 4:
                        raise ValueError("eckey needs curve, private and public")
                    group = _CURVE_NAMES[fields[1]]
                    store.ec_keys.append(
                        EcCredential(
                            group,
                            int(fields[2], 16),
                            bytes.fromhex(fields[3]),
                        )
                    )
                elif kind == "certsize":
                    store.cert_size = int(fields[1])
                else:
                    raise ValueError(f"unknown record kind {kind!r}")
            except (ValueError, KeyError, IndexError) as exc:
                raise CredentialParseError(line_no, str(exc)) from None
    return store


def synthetic_cert(rng: random.Random, cert_size: int) -> bytes:
    """Opaque stand-in certificate blob of exactly cert_size bytes."""
    return rng.randbytes(cert_size)


def make_deployment(seed: int, groups, cert_size: int) -> dict:
    """Deterministic credential material for one client/server pair."""
    from . import ec as _ecmod

    rng = random.Random(f"minitls-creds-{seed}")
    psk = PskCredential(identity=b"bench-psk-" + rng.randbytes(6), secret=rng.randbytes(32))
    out = {"psk": psk, "client_ec": {}, "server_ec": {}}
    for group in groups:
        for side in ("client_ec", "server_ec"):
            priv, pub = _ecmod.keypair(group, rng)
            out[side][group] = EcCredential(
                group, priv.d, pub, synthetic_cert(rng, cert_size)
            )
    return out
