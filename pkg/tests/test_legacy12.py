from minitls import legacy12
from minitls.crypto import NamedGroup


def test_model_is_deterministic():
    a = legacy12.model_messages("dtls", "pk", cert_size=500, sni_len=11)
    b = legacy12.model_messages("dtls", "pk", cert_size=500, sni_len=11)
    assert a == b


def test_header_constants_sum_field_widths():
    assert legacy12.TLS12_RECORD_HEADER == 1 + 2 + 2
    assert legacy12.DTLS12_RECORD_HEADER == 1 + 2 + 2 + 6 + 2
    assert legacy12.DTLS_HS_HEADER == 1 + 3 + 2 + 3 + 3
    assert legacy12.TLS_HS_HEADER == 1 + 3


def test_psk_message_set():
    rows = legacy12.model_messages("tls", "psk")
    names = [n for n, _, _ in rows]
    assert names == [
        "client_hello",
        "server_hello",
        "server_hello_done",
        "client_key_exchange",
        "change_cipher_spec",
        "finished",
        "change_cipher_spec",
        "finished",
    ]


def test_dtls_includes_hello_verify_exchange():
    rows = legacy12.model_messages("dtls", "psk")
    names = [n for n, _, _ in rows]
    assert names[:3] == ["client_hello", "hello_verify_request", "client_hello"]
    ch1 = rows[0][2]
    ch2 = rows[2][2]
    assert ch2 - ch1 == legacy12.HVR_COOKIE  # retry echoes the cookie
    bare = legacy12.model_messages("dtls", "psk", hello_verify=False)
    assert [n for n, _, _ in bare][0] == "client_hello" and len(bare) == len(rows) - 2


def test_pk_message_set_mutual():
    rows = legacy12.model_messages("dtls", "pk", mutual=True)
    names = [n for n, _, _ in rows]
    for required in ("server_key_exchange", "certificate_request", "certificate_verify"):
        assert required in names
    assert names.count("certificate") == 2
    one_way = [n for n, _, _ in legacy12.model_messages("dtls", "pk", mutual=False)]
    assert "certificate_verify" not in one_way
    assert one_way.count("certificate") == 1


def test_cert_size_sensitivity_exact():
    base = legacy12.model_total("dtls", "pk", cert_size=500)
    grown = legacy12.model_total("dtls", "pk", cert_size=800)
    assert grown - base == 2 * 300  # both directions carry one certificate


def test_finished_record_overhead():
    rows = dict(
        ((n, d), s) for n, d, s in legacy12.model_messages("tls", "psk")
    )
    finished = rows[("finished", "c2s")]
    assert finished == (
        legacy12.TLS12_RECORD_HEADER
        + legacy12.AEAD_EXPLICIT_NONCE
        + legacy12.TLS_HS_HEADER
        + legacy12.FINISHED_VERIFY_DATA
        + 16
    )


def test_p521_grows_key_exchange():
    p256 = legacy12.model_total("dtls", "pk", group=NamedGroup.SECP256R1)
    p521 = legacy12.model_total("dtls", "pk", group=NamedGroup.SECP521R1)
    assert p521 > p256
    # point growth twice (SKE + CKE), signature growth twice (SKE + client CV)
    delta = (133 - 65) * 2 + (legacy12.DER_SIG_LEN[NamedGroup.SECP521R1] - 72) * 2
    assert p521 - p256 == delta
