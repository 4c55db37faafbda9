import json

import pytest

from nfcbms import ecc
from nfcbms.auth import (
    ActionTaken,
    AllowList,
    AuthOutcome,
    AuthPolicy,
    BadKeyFile,
    authenticate_tag,
    load_private_key,
    load_public_key,
    sign_uid,
    write_keyfile,
)
from nfcbms.channel import Channel, ChannelConfig, Timeout
from nfcbms.ntag import provision
from nfcbms.simclock import SimClock

KEY = 0x0DDBA11CAFE
PUB = ecc.public_key(KEY)
UID = bytes.fromhex("e004015000000042")


def setup(tag, **cfg):
    ch = Channel(ChannelConfig(**cfg), clock=SimClock())
    ch.place(tag, 2.0)
    return ch


def test_accepts_genuine_tag():
    tag = provision(UID, sign_uid(KEY, UID))
    ch = setup(tag)
    res = authenticate_tag(ch, tag, AllowList([UID]), PUB)
    assert res.outcome is AuthOutcome.ACCEPTED and res.action is ActionTaken.NONE
    assert ch.clock.now_ms == pytest.approx(369.30)


def test_unknown_uid_short_circuits():
    tag = provision(UID, sign_uid(KEY, UID))
    ch = setup(tag)
    res = authenticate_tag(ch, tag, AllowList([bytes(8)]), PUB)
    assert res.outcome is AuthOutcome.REJECTED_UID
    assert not any(e.command == "READ_SIGNATURE" for e in ch.transcript)
    assert ch.transcript == []


def test_cloned_signature_rejected():
    other = bytes.fromhex("e004015000000043")
    tag = provision(UID, sign_uid(KEY, other))
    res = authenticate_tag(setup(tag), tag, AllowList([UID]), PUB, AuthPolicy.WARN)
    assert res.outcome is AuthOutcome.REJECTED_SIGNATURE and res.action is ActionTaken.WARNING_RAISED


def test_wrong_key_rejected_with_shutdown():
    tag = provision(UID, sign_uid(KEY + 1, UID))
    res = authenticate_tag(setup(tag), tag, AllowList([UID]), PUB, AuthPolicy.SHUTDOWN)
    assert res.outcome is AuthOutcome.REJECTED_SIGNATURE and res.action is ActionTaken.SYSTEM_SHUTDOWN


def test_zero_signature_rejected():
    tag = provision(UID, bytes(32))
    assert not authenticate_tag(setup(tag), tag, AllowList([UID]), PUB).accepted


def test_timeout_propagates():
    tag = provision(UID, sign_uid(KEY, UID))
    with pytest.raises(Timeout):
        authenticate_tag(setup(tag, drop_probability=1.0), tag, AllowList([UID]), PUB)


def test_allow_list_exact_bytes():
    al = AllowList([UID])
    assert UID in al and bytearray(UID) in al
    assert UID[:-1] + b"\x00" not in al


def test_keyfile_round_trip(tmp_path):
    write_keyfile(tmp_path / "k.json", KEY)
    assert load_private_key(tmp_path / "k.json") == KEY
    assert load_public_key(tmp_path / "k.json") == PUB
    doc = json.loads((tmp_path / "k.json").read_text())
    assert doc["public"] == ecc.encode_point(PUB).hex()


@pytest.mark.parametrize("content", ['{"private": "0"}', "not json", "{}", '{"private": "zz"}'])
def test_bad_keyfile(tmp_path, content):
    (tmp_path / "k.json").write_text(content)
    with pytest.raises(BadKeyFile):
        load_private_key(tmp_path / "k.json")


def test_missing_keyfile(tmp_path):
    with pytest.raises(BadKeyFile):
        load_private_key(tmp_path / "absent.json")
