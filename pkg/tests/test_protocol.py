import datetime

import pytest

from savacert import crypto, oids, protocol
from savacert.certs import fingerprint
from savacert.der import Oid, encode
from savacert.policytree import CprRequirement
from savacert.validation import FailureReason, VerdictStatus

from conftest import NOW

P1 = Oid("1.3.6.1.4.1.57264.8.1")


@pytest.fixture
def happy(scenarios):
    return {
        "root": scenarios.cert("happy3", "root", "root"),
        "sub": scenarios.cert("happy3", "sub", "root"),
        "ee": scenarios.cert("happy3", "ee", "sub"),
    }


@pytest.fixture
def server_key(server_identity):
    return crypto.decode_key(server_identity.key_path.read_bytes())


def build(targets, cpr=None, **kwargs):
    return protocol.build_request(
        targets=targets, cpr=cpr or CprRequirement.any_policy(), now=NOW,
        **kwargs)


def test_request_roundtrip(happy):
    request = build(
        [happy["ee"], happy["sub"]],
        CprRequirement.strict((P1,), True, False),
        dvcs_name=happy["root"].subject,
        request_policy=oids.POLICY_DEFAULT,
        want_backs={protocol.WantBack.CHAIN, protocol.WantBack.CRLS},
        supplied_chains=[happy["sub"]],
        time_override=NOW)
    raw = protocol.encode_request(request)
    parsed = protocol.parse_request(raw)
    assert parsed == request
    assert protocol.encode_request(parsed) == raw
    assert parsed.info.supplied_chains() == (happy["sub"],)
    assert parsed.info.want_backs() == frozenset(
        {protocol.WantBack.CHAIN, protocol.WantBack.CRLS})
    assert parsed.info.time_override() == NOW
    assert parsed.acceptable_set == (P1,)
    assert parsed.explicit_policy_required


def test_strict_cpr_uses_fields_weak_uses_extension(happy):
    strict = build([happy["ee"]], CprRequirement.strict((P1,)))
    assert strict.acceptable_set == (P1,)
    assert strict.info.intended_usage() is None

    weak = build([happy["ee"]], CprRequirement.weak("e-mail"))
    assert weak.acceptable_set == ()
    assert weak.info.intended_usage() == "e-mail"
    ext = weak.info.extension(oids.REQ_INTENDED_USAGE)
    assert ext is not None and ext.critical

    blank = build([happy["ee"]])
    assert blank.acceptable_set == ()
    assert not blank.explicit_policy_required
    assert blank.info.extensions == ()


def test_request_needs_targets(happy):
    request = build([happy["ee"]])
    with pytest.raises(protocol.ProtocolError):
        protocol.encode_request(protocol.ValidationRequest(request.info, ()))


def test_extension_oid_constants():
    assert oids.REQ_INTENDED_USAGE.dotted() == "1.3.6.1.4.1.57264.2.1"
    assert oids.REQ_SUPPLIED_CHAINS.dotted() == "1.3.6.1.4.1.57264.2.2"
    assert oids.REQ_WANT_BACKS.dotted() == "1.3.6.1.4.1.57264.2.3"
    assert oids.REQ_TIME_OVERRIDE.dotted() == "1.3.6.1.4.1.57264.2.4"


def test_raw_target_bytes_equal_parsed_encoding(happy, scenarios):
    raw_target = scenarios.cert_path("happy3", "ee", "sub").read_bytes()
    thin = build([raw_target])
    rich = protocol.ValidationRequest(thin.info, (happy["ee"],))
    assert protocol.encode_request(thin) == protocol.encode_request(rich)
    assert thin.target_fingerprints() == [fingerprint(happy["ee"])]


def test_request_signature(happy, scenarios):
    root_key = crypto.decode_key(
        scenarios.layout("happy3").keys["root"].read_bytes())
    signed = build([happy["ee"]], signer_key=root_key,
                   signer_cert=happy["root"])
    raw = protocol.encode_request(signed)
    parsed = protocol.parse_request(raw)
    assert protocol.verify_request_signature(parsed)
    # altering the body invalidates the signature
    altered = protocol.ValidationRequest(
        parsed.info, parsed.targets, (P1,),
        parsed.explicit_policy_required, parsed.inhibit_policy_mapping,
        parsed.signature)
    assert not protocol.verify_request_signature(altered)


def _dvc(happy, server_identity, server_key, results=None, echo=None):
    request = build([happy["ee"]])
    info = protocol.DvcInfo(
        serial_number=7, produced_at=NOW,
        echo=echo if echo is not None else request.info,
        results=results if results is not None else (
            protocol.TargetResult(fingerprint(happy["ee"]),
                                  VerdictStatus.VALID, (P1,), ()),))
    return request, info


def test_dvc_sign_parse_verify(happy, server_identity, server_key):
    request, info = _dvc(happy, server_identity, server_key)
    raw = protocol.sign_dvc(info, server_identity.certificate, server_key)
    parsed = protocol.parse_response(raw)
    assert isinstance(parsed, protocol.DvcResponse)
    assert parsed.info == info
    protocol.verify_response(parsed, request.info,
                             protocol.ResponseTrust())

    # byte-exact echo invariant
    assert encode(protocol.info_value(parsed.info.echo)) == \
        encode(protocol.info_value(request.info))


def test_echo_mismatch_detected(happy, server_identity, server_key):
    request, info = _dvc(happy, server_identity, server_key)
    tampered_echo = protocol.RequestInformation(
        nonce=request.info.nonce,  # same nonce, different field
        request_time=request.info.request_time + datetime.timedelta(seconds=1))
    bad_info = protocol.DvcInfo(info.serial_number, info.produced_at,
                                tampered_echo, info.results)
    raw = protocol.sign_dvc(bad_info, server_identity.certificate, server_key)
    with pytest.raises(protocol.EchoMismatch):
        protocol.verify_response(protocol.parse_response(raw), request.info,
                                 protocol.ResponseTrust())


def test_nonce_mismatch_detected(happy, server_identity, server_key):
    request, info = _dvc(happy, server_identity, server_key)
    other = build([happy["ee"]])
    raw = protocol.sign_dvc(
        protocol.DvcInfo(1, NOW, other.info, info.results),
        server_identity.certificate, server_key)
    with pytest.raises(protocol.NonceMismatch):
        protocol.verify_response(protocol.parse_response(raw), request.info,
                                 protocol.ResponseTrust())


def test_tampered_signature_detected(happy, server_identity, server_key):
    request, info = _dvc(happy, server_identity, server_key)
    raw = bytearray(protocol.sign_dvc(info, server_identity.certificate,
                                      server_key))
    raw[-1] ^= 0x01
    with pytest.raises(protocol.BadServerSignature):
        protocol.verify_response(protocol.parse_response(bytes(raw)),
                                 request.info, protocol.ResponseTrust())


def test_tampered_dvc_info_detected(happy, server_identity, server_key):
    request, info = _dvc(happy, server_identity, server_key)
    raw = protocol.sign_dvc(info, server_identity.certificate, server_key)
    # flip a byte inside dvcInfo (the serial integer content)
    serial_der = encode(protocol.dvc_info_value(info))
    index = raw.index(serial_der[:20]) + 10
    tampered = bytearray(raw)
    tampered[index] ^= 0x01
    try:
        parsed = protocol.parse_response(bytes(tampered))
    except Exception:
        return  # structural damage is an acceptable outcome
    with pytest.raises((protocol.BadServerSignature, protocol.EchoMismatch,
                        protocol.NonceMismatch)):
        protocol.verify_response(parsed, request.info,
                                 protocol.ResponseTrust())


def test_unsigned_response_policy(happy, server_identity, server_key):
    request, info = _dvc(happy, server_identity, server_key)
    raw = protocol.unsigned_dvc(info)
    parsed = protocol.parse_response(raw)
    with pytest.raises(protocol.UnsignedRejected):
        protocol.verify_response(parsed, request.info,
                                 protocol.ResponseTrust(trust_unsigned=False))
    protocol.verify_response(parsed, request.info,
                             protocol.ResponseTrust(trust_unsigned=True))


def test_error_notice_roundtrip(happy, server_identity, server_key):
    request, _ = _dvc(happy, server_identity, server_key)
    notice = protocol.ErrorNotice(protocol.ErrorCode.WRONG_SERVER,
                                  "request addressed elsewhere", request.info)
    raw = protocol.sign_error_notice(notice, server_identity.certificate,
                                     server_key)
    parsed = protocol.parse_response(raw)
    assert isinstance(parsed, protocol.ErrorNotice)
    assert parsed.code is protocol.ErrorCode.WRONG_SERVER
    assert parsed.echo == request.info
    protocol.verify_response(parsed, request.info, protocol.ResponseTrust())


def test_render_request_lists_targets_in_order(happy):
    request = build([happy["ee"], happy["sub"]])
    text = protocol.render(request)
    first = text.index(fingerprint(happy["ee"]).hex())
    second = text.index(fingerprint(happy["sub"]).hex())
    assert first < second
    assert "(blank: any policy)" in text


def test_render_revoked_includes_crl_entry(happy, scenarios, server_identity,
                                           server_key):
    from savacert.certs import parse_crl
    layout = scenarios.layout("revoked-ee")
    crl = parse_crl(layout.crls["sub"].read_bytes())
    ee = scenarios.cert("revoked-ee", "ee", "sub")
    result = protocol.TargetResult(
        fingerprint(ee), VerdictStatus.INVALID,
        reason=FailureReason.REVOKED, failing_index=1,
        evidence=protocol.EvidenceOut(crls=(crl,), validation_time=NOW))
    request = build([ee])
    raw = protocol.sign_dvc(
        protocol.DvcInfo(3, NOW, request.info, (result,)),
        server_identity.certificate, server_key)
    text = protocol.render(protocol.parse_response(raw))
    assert "REVOKED" in text.upper()
    assert "20250102000000Z" in text  # revocation date from the CRL entry
    assert "KEY_COMPROMISE" in text


def test_render_sanitizes_control_characters(happy, server_identity,
                                             server_key):
    notice = protocol.ErrorNotice(protocol.ErrorCode.INTERNAL_ERROR,
                                  "bad\x07bell\x1b[31m")
    raw = protocol.sign_error_notice(notice, server_identity.certificate,
                                     server_key)
    text = protocol.render(protocol.parse_response(raw))
    assert "\x07" not in text and "\x1b" not in text
    assert "\\x07" in text
