import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minitls import messages as m
from minitls.crypto import NamedGroup, Protocol, SignatureScheme, SuiteId
from minitls.errors import (
    ConfigConflict,
    DecodeError,
    FragmentGap,
    InconsistentDuplicate,
)


def sample_messages():
    rng = random.Random(11)
    ch_psk = m.build_client_hello(
        rng,
        [SuiteId.AES_128_CCM_SHA256],
        psk_identity=b"client-psk-1",
        obfuscated_age=0x11223344,
        binder_len=32,
    )
    ch_pk = m.build_client_hello(
        rng,
        [SuiteId.AES_128_CCM_SHA256, SuiteId.AES_256_CCM_SHA384],
        compat_session=True,
        key_share_entries=[(NamedGroup.SECP256R1, b"\x04" + bytes(64))],
        groups=[NamedGroup.SECP256R1],
        sig_algs=[SignatureScheme.ECDSA_SECP256R1_SHA256],
        server_name="iot.example",
        cid=b"\xca\xfe\x00\x01",
    )
    sh = m.build_server_hello(
        rng.randbytes(32),
        b"",
        SuiteId.AES_128_CCM_SHA256,
        key_share_entry=(NamedGroup.SECP256R1, b"\x04" + bytes(64)),
        selected_psk=0,
    )
    return [
        ch_psk,
        ch_pk,
        sh,
        m.build_hello_retry_request(SuiteId.AES_128_CCM_SHA256, b"cookie-bytes"),
        m.EncryptedExtensions([m.ext_early_data()]),
        m.EncryptedExtensions([]),
        m.build_certificate(b"", [b"\x30\x82" + bytes(500)]),
        m.build_certificate_request([SignatureScheme.ECDSA_SECP256R1_SHA256]),
        m.build_certificate_verify(SignatureScheme.ECDSA_SECP256R1_SHA256, b"\x30\x44" + bytes(68)),
        m.build_finished(bytes(range(32))),
        m.build_new_session_ticket(7200, 0xDEADBEEF, b"\x00", b"ticket-id-16byte", 1024),
        m.build_end_of_early_data(),
    ]


@pytest.mark.parametrize("protocol", [Protocol.TLS, Protocol.DTLS])
def test_round_trip_all_messages(protocol):
    for msg in sample_messages():
        wire = m.encode_handshake(msg, protocol, message_seq=3)
        decoded = m.decode_handshake(wire, protocol)
        assert decoded == msg
        assert m.encode_handshake(decoded, protocol, message_seq=3) == wire


def test_header_arithmetic():
    fin = m.build_finished(bytes(32))
    assert len(m.encode_handshake(fin, Protocol.TLS)) == 4 + 32
    assert len(m.encode_handshake(fin, Protocol.DTLS, message_seq=0)) == 12 + 32


def test_decode_rejects_every_truncation():
    for msg in sample_messages():
        wire = m.encode_handshake(msg, Protocol.TLS)
        for cut in range(len(wire)):
            with pytest.raises(DecodeError):
                m.decode_handshake(wire[:cut])


def test_decode_rejects_trailing_garbage():
    wire = m.encode_handshake(m.build_finished(bytes(32)), Protocol.TLS)
    with pytest.raises(DecodeError):
        m.decode_handshake(wire + b"\x00")


def test_decode_unknown_type():
    with pytest.raises(DecodeError):
        m.decode_handshake(b"\x63\x00\x00\x00")


@settings(max_examples=300, deadline=None)
@given(st.binary(min_size=0, max_size=80))
def test_decoder_total_on_random_bytes(data):
    try:
        msg = m.decode_handshake(data)
    except DecodeError:
        return
    assert m.encode_handshake(msg, Protocol.TLS) == data


def test_psk_extension_must_be_last():
    rng = random.Random(0)
    ch = m.build_client_hello(rng, [SuiteId.AES_128_CCM_SHA256], psk_identity=b"id", binder_len=32)
    ch.extensions.append(m.ext_early_data())
    with pytest.raises(DecodeError):
        m.decode_handshake(m.encode_handshake(ch, Protocol.TLS))


def test_duplicate_extension_rejected():
    rng = random.Random(0)
    ch = m.build_client_hello(rng, [SuiteId.AES_128_CCM_SHA256])
    ch.extensions.append(m.ext_supported_versions_client())
    with pytest.raises(DecodeError):
        m.decode_handshake(m.encode_handshake(ch, Protocol.TLS))


def test_client_hello_builder_rules():
    rng = random.Random(1)
    ch = m.build_client_hello(
        rng,
        [SuiteId.AES_128_CCM_SHA256],
        psk_identity=b"psk-id",
        binder_len=32,
    )
    assert ch.extensions[-1].ext_type == m.ExtensionType.PRE_SHARED_KEY
    assert m.find_extension(ch.extensions, m.ExtensionType.KEY_SHARE) is None
    assert m.find_extension(ch.extensions, m.ExtensionType.SERVER_NAME) is None
    assert ch.legacy_session_id == b""

    pk = m.build_client_hello(
        rng,
        [SuiteId.AES_128_CCM_SHA256],
        key_share_entries=[(NamedGroup.SECP256R1, b"\x04" + bytes(64))],
        groups=[NamedGroup.SECP256R1],
        sig_algs=[SignatureScheme.ECDSA_SECP256R1_SHA256],
        server_name="iot.example",
    )
    shares = m.parse_key_share_client(
        m.find_extension(pk.extensions, m.ExtensionType.KEY_SHARE).data
    )
    assert len(shares) == 1
    assert len(shares[0][1]) == 65
    assert (
        m.parse_server_name(m.find_extension(pk.extensions, m.ExtensionType.SERVER_NAME).data)
        == "iot.example"
    )

    with pytest.raises(ConfigConflict):
        m.build_client_hello(rng, [SuiteId.AES_128_CCM_SHA256], early_data=True)


def test_client_hello_deterministic_from_seed():
    build = lambda: m.build_client_hello(
        random.Random(77),
        [SuiteId.AES_128_CCM_SHA256],
        compat_session=True,
        psk_identity=b"id",
        binder_len=32,
    )
    assert m.tls_form(build()) == m.tls_form(build())


def test_binder_truncation_and_patch():
    rng = random.Random(2)
    ch = m.build_client_hello(rng, [SuiteId.AES_128_CCM_SHA256], psk_identity=b"id", binder_len=32)
    full = m.tls_form(ch)
    trunc = m.truncated_tls_form(ch, 32)
    assert full.startswith(trunc)
    assert len(full) - len(trunc) == 2 + 1 + 32
    m.patch_binder(ch, b"\xaa" * 32)
    patched = m.tls_form(ch)
    assert patched[: len(trunc)] == trunc
    assert patched.endswith(b"\xaa" * 32)
    _, _, binder = m.parse_pre_shared_key_offer(
        m.find_extension(ch.extensions, m.ExtensionType.PRE_SHARED_KEY).data
    )
    assert binder == b"\xaa" * 32


def test_hrr_sentinel_detection():
    hrr = m.build_hello_retry_request(SuiteId.AES_128_CCM_SHA256, b"c" * 33)
    assert m.is_hello_retry_request(hrr)
    assert m.parse_cookie(m.find_extension(hrr.extensions, m.ExtensionType.COOKIE).data) == b"c" * 33
    sh = m.build_server_hello(bytes(32), b"", SuiteId.AES_128_CCM_SHA256, selected_psk=0)
    assert not m.is_hello_retry_request(sh)


def test_server_hello_psk_selection_zero():
    sh = m.build_server_hello(bytes(32), b"sid", SuiteId.AES_128_CCM_SHA256, selected_psk=0)
    ext = m.find_extension(sh.extensions, m.ExtensionType.PRE_SHARED_KEY)
    assert ext.data == b"\x00\x00"
    assert sh.legacy_session_id_echo == b"sid"


def test_fragmentation_three_parts_reverse_reassembly():
    rng = random.Random(3)
    cert = m.build_certificate(b"", [rng.randbytes(3000 - 11)])
    wire = m.encode_handshake(cert, Protocol.DTLS, message_seq=2)
    frags = m.fragment(wire, 1200)
    assert len(frags) == 3
    assert all(len(f.encode()) <= 1200 for f in frags)
    assert m.reassemble(reversed(frags)) == wire


def test_fragment_single_identity():
    wire = m.encode_handshake(m.build_finished(bytes(32)), Protocol.DTLS, message_seq=0)
    frags = m.fragment(wire, 1200)
    assert len(frags) == 1
    assert m.reassemble(frags) == wire


def test_fragment_random_split_points():
    rng = random.Random(4)
    for _ in range(500):
        body = rng.randbytes(rng.randrange(1, 400))
        cert = m.build_certificate(b"", [body])
        wire = m.encode_handshake(cert, Protocol.DTLS, message_seq=1)
        budget = rng.randrange(13, 200)
        frags = m.fragment(wire, budget)
        rng.shuffle(frags)
        frags += [frags[0]]  # duplicate tolerated
        assert m.reassemble(frags) == wire


def test_fragment_gap_and_inconsistency():
    wire = m.encode_handshake(m.build_certificate(b"", [bytes(100)]), Protocol.DTLS, message_seq=0)
    frags = m.fragment(wire, 50)
    with pytest.raises(FragmentGap):
        m.reassemble(frags[:-1])
    bad = m.DtlsFragment(
        frags[0].msg_type,
        frags[0].length,
        frags[0].message_seq,
        frags[0].fragment_offset,
        frags[0].fragment_length,
        b"\xff" * frags[0].fragment_length,
    )
    with pytest.raises(InconsistentDuplicate):
        m.reassemble([frags[0], bad])


def test_fragment_range_validation():
    with pytest.raises(DecodeError):
        m.decode_dtls_fragment(
            bytes([20]) + (5).to_bytes(3, "big") + b"\x00\x00" + (3).to_bytes(3, "big") + (4).to_bytes(3, "big") + bytes(4)
        )


def test_ack_codec():
    body = m.build_ack([(2, 5), (3, 0)])
    assert len(body) == 2 + 32
    assert m.parse_ack(body) == [(2, 5), (3, 0)]
    with pytest.raises(DecodeError):
        m.parse_ack(body + b"\x00")


def test_certificate_verify_content_shape():
    th = bytes(range(32))
    content = m.certificate_verify_content("server", th)
    assert content.startswith(b" " * 64)
    assert b"server CertificateVerify" in content
    assert content.endswith(b"\x00" + th)
    assert m.certificate_verify_content("client", th) != content


def test_dump_line_format():
    raw = m.tls_form(m.build_finished(bytes(32)))
    line = m.dump_line("c2s", raw)
    direction, name, length, hexpart = line.split()
    assert (direction, name, int(length)) == ("c2s", "finished", 36)
    assert bytes.fromhex(hexpart) == raw
