import pytest

from minitls.crypto import NamedGroup, SuiteId
from minitls.errors import CredentialParseError, IllegalOverride, UnknownProfile
from minitls import profiles
from minitls.profiles import AuthMode, resolve


def test_psk128_profile():
    p = resolve("psk128")
    assert p.suites == (SuiteId.AES_128_CCM_SHA256,)
    assert p.modes == {AuthMode.PSK}
    assert p.sni_hostname is None
    assert p.max_key_shares == 1


def test_ecdsa128_256_profile():
    p = resolve("ecdsa128_256")
    assert set(p.suites) == {SuiteId.AES_128_CCM_SHA256, SuiteId.AES_256_CCM_SHA384}
    assert p.groups == (NamedGroup.SECP256R1, NamedGroup.SECP521R1)
    assert p.sni_hostname is not None
    assert p.mutual_auth


def test_full_profile_flags():
    p = resolve("full")
    assert p.zero_rtt and p.compat_mode and p.tickets
    assert AuthMode.PSK_ECDHE not in p.modes


def test_full_is_superset_of_every_profile():
    full = resolve("full")
    for name in profiles.profile_names():
        p = resolve(name)
        assert set(p.suites) <= set(full.suites)
        assert set(p.groups) <= set(full.groups)
        assert p.modes <= full.modes | {AuthMode.PSK_ECDHE}
        for flag in ("compat_mode", "zero_rtt", "tickets"):
            assert getattr(full, flag) >= getattr(p, flag)


def test_resolution_pure():
    assert resolve("ecdsa128", {"cert_size": 800}) == resolve("ecdsa128", {"cert_size": 800})
    assert resolve("ecdsa128", {"cert_size": 800}).cert_size == 800
    assert resolve("ecdsa128").cert_size == 500


def test_unknown_profile():
    with pytest.raises(UnknownProfile):
        resolve("rsa4096")


def test_illegal_overrides():
    with pytest.raises(IllegalOverride):
        resolve("psk128", {"max_key_shares": 2})
    with pytest.raises(IllegalOverride):
        resolve("psk128", {"modes": {AuthMode.PK_MUTUAL}})
    with pytest.raises(IllegalOverride):
        resolve("ecdsa128", {"modes": {AuthMode.PSK}})
    with pytest.raises(IllegalOverride):
        resolve("ecdsa128", {"zero_rtt": True})
    with pytest.raises(IllegalOverride):
        resolve("psk128", {"cid": 40})


def test_psk_ecdhe_reachable_by_override():
    p = resolve("psk128", {"modes": {AuthMode.PSK_ECDHE}, "groups": (NamedGroup.SECP256R1,)})
    assert p.modes == {AuthMode.PSK_ECDHE}


def test_zero_rtt_override_on_psk_profile_is_legal():
    p = resolve("psk128", {"zero_rtt": True})
    assert p.zero_rtt


def test_credential_file_round_trip(tmp_path):
    path = tmp_path / "creds.txt"
    path.write_text(
        "# deployment credentials\n"
        "psk 70736b2d6964 " + "ab" * 32 + "\n"
        "eckey p256 1234 04" + "00" * 64 + "\n"
        "certsize 800\n"
    )
    store = profiles.credential_store_load(path)
    assert len(store.psks) == 1
    assert store.psks[0].identity == b"psk-id"
    assert store.ec_keys[0].group == NamedGroup.SECP256R1
    assert store.ec_keys[0].private_value == 0x1234
    assert store.cert_size == 800


def test_credential_parse_error_names_line(tmp_path):
    path = tmp_path / "creds.txt"
    path.write_text("psk 70736b 00ff\n\npsk zznothex 00\n")
    with pytest.raises(CredentialParseError) as exc_info:
        profiles.credential_store_load(path)
    assert exc_info.value.line_no == 3
    assert "line 3" in str(exc_info.value)


def test_cert_size_changes_blob_by_exact_delta():
    import random

    a = profiles.synthetic_cert(random.Random(1), 500)
    b = profiles.synthetic_cert(random.Random(1), 800)
    assert len(b) - len(a) == 300


def test_make_deployment_deterministic():
    d1 = profiles.make_deployment(7, [NamedGroup.SECP256R1], 500)
    d2 = profiles.make_deployment(7, [NamedGroup.SECP256R1], 500)
    assert d1["psk"] == d2["psk"]
    assert d1["client_ec"] == d2["client_ec"]
    assert len(d1["server_ec"][NamedGroup.SECP256R1].cert_der) == 500
