import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nfcbms.channel import (
    Channel,
    ChannelConfig,
    FieldModel,
    NotPowered,
    PackSealed,
    Timeout,
    field_voltage,
    transceive,
)
from nfcbms.frames import Command, CrcMismatch, RequestFrame, encode_response
from nfcbms.ntag import NtagConfig, provision
from nfcbms.simclock import SimClock

GOLDEN = json.loads((Path(__file__).parent / "golden" / "corrupt_positions.json").read_text())


def make_tag(uid=b"\xe0\x04\x01\x50\x00\x00\x00\x01", **cfg):
    return provision(uid, bytes(32), NtagConfig(initialized=True, **cfg))


@pytest.mark.parametrize(
    "d,mv",
    [(0.0, 3000.0), (2.0, 3000.0), (3.7, 1500.0), (5.4, 0.0), (6.0, 0.0), (100.0, 0.0)],
)
def test_field_voltage_examples(d, mv):
    assert field_voltage(FieldModel(distance_cm=d)) == pytest.approx(mv, abs=1e-9)


def test_field_off():
    assert field_voltage(FieldModel(distance_cm=1.0, reader_field_on=False)) == 0.0


@given(st.floats(0, 20), st.floats(0, 20))
def test_field_monotone(a, b):
    lo, hi = sorted((a, b))
    assert field_voltage(FieldModel(distance_cm=lo)) >= field_voltage(FieldModel(distance_cm=hi))


@given(st.floats(5.4, 1000, exclude_min=True), st.sampled_from(list(Command)))
def test_no_response_beyond_range(d, cmd):
    tag = make_tag()
    ch = Channel()
    ch.place(tag, d)
    with pytest.raises(Timeout):
        ch.transceive(RequestFrame(cmd, uid=tag.uid), tag)
    assert ch.responses() == []


def test_transparent_channel_matches_direct_call():
    tag = make_tag()
    ch = Channel()
    ch.place(tag, 2.0)
    twin = make_tag()
    twin.energy_check(3000)
    for req in (
        RequestFrame(Command.READ_SIGNATURE),
        RequestFrame(Command.ENERGY_STATUS),
        RequestFrame(Command.SRAM_WRITE, block_address=3, block_count=1, payload=b"abcd"),
        RequestFrame(Command.SRAM_CONTENT_READ, block_address=3, block_count=1),
        RequestFrame(Command.GET_CONFIG),
    ):
        assert transceive(req, tag, ch) == twin.handle_command(req)


def test_drop_all_is_timeout():
    tag = make_tag()
    ch = Channel(ChannelConfig(drop_probability=1.0))
    ch.place(tag, 2.0)
    with pytest.raises(Timeout):
        ch.transceive(RequestFrame(Command.ENERGY_STATUS), tag)
    assert [e.kind for e in ch.transcript] == ["req", "drop"]


def test_corruption_surfaces_as_crc_mismatch():
    tag = make_tag()
    ch = Channel(ChannelConfig(corrupt_probability=1.0))
    ch.place(tag, 2.0)
    with pytest.raises(CrcMismatch):
        ch.transceive(RequestFrame(Command.READ_SIGNATURE), tag)


def corrupt_run():
    tag = make_tag()
    cfg = ChannelConfig(corrupt_probability=GOLDEN["corrupt_probability"], rng_seed=GOLDEN["seed"])
    ch = Channel(cfg)
    ch.place(tag, 2.0)
    clean = encode_response(tag.handle_command(RequestFrame(Command.READ_SIGNATURE)))
    events = []
    for i in range(GOLDEN["transceives"]):
        try:
            ch.transceive(RequestFrame(Command.READ_SIGNATURE), tag)
        except CrcMismatch:
            raw = ch.transcript[-1].data
            diff = [k for k in range(len(raw) * 8) if (raw[k // 8] ^ clean[k // 8]) >> (k % 8) & 1]
            events.append((i, diff))
    return events, clean, [e.line() for e in ch.transcript]


def test_corruption_positions_match_golden():
    events, clean, _ = corrupt_run()
    nbits = len(clean) * 8
    expected = [(e["index"], [e["bits"] % nbits]) for e in GOLDEN["events"]]
    assert events == expected
    assert 30 < len(events) < 70


def test_corruption_replay_identical():
    assert corrupt_run() == corrupt_run()


@given(st.integers(0, 2**64 - 1), st.floats(0, 0.9), st.floats(0, 0.9))
def test_transcript_determinism(seed, p_drop, p_corrupt):
    def run():
        tag = make_tag()
        ch = Channel(ChannelConfig(p_drop, p_corrupt, seed))
        ch.place(tag, 2.0)
        for n in range(20):
            try:
                ch.transceive(RequestFrame(Command.SRAM_CONTENT_READ, block_address=n, block_count=1), tag)
            except (Timeout, CrcMismatch):
                pass
        return [e.line() for e in ch.transcript]

    assert run() == run()


def test_discover_sorted_and_range_limited():
    clock = SimClock()
    ch = Channel(clock=clock)
    near_b = make_tag(b"\xe0" + b"\x02" * 7)
    near_a = make_tag(b"\xe0" + b"\x01" * 7)
    far = make_tag(b"\xe0" + b"\x00" * 7)
    ch.place(near_b, 2.0)
    ch.place(near_a, 3.0)
    ch.place(far, 6.0)
    assert ch.discover() == [near_a.uid, near_b.uid]
    assert clock.now_ms == pytest.approx(clock.latency.discovery)


def test_discover_empty():
    ch = Channel()
    ch.place(make_tag(), 6.0)
    assert ch.discover() == []


def test_command_raises_for_unpowered_tag():
    tag = make_tag()
    ch = Channel()
    ch.place(tag, 4.0)
    with pytest.raises(NotPowered):
        ch.command(RequestFrame(Command.SRAM_CONTENT_READ, block_count=1), tag)


def test_sealed_pack_refuses_external_reader():
    tag = make_tag()
    ch = Channel(ChannelConfig(external=True, sealed=True))
    ch.place(tag, 2.0)
    with pytest.raises(PackSealed):
        ch.transceive(RequestFrame(Command.READ_SIGNATURE), tag)
    assert ch.responses() == []
    open_ch = Channel(ChannelConfig(external=True, sealed=False))
    open_ch.place(tag, 2.0)
    assert open_ch.transceive(RequestFrame(Command.READ_SIGNATURE), tag).payload == bytes(32)


def test_unknown_command_gets_error_reply():
    from nfcbms.frames import ErrorCode, decode_response
    from oracles import crc_x25

    tag = make_tag()
    ch = Channel()
    ch.place(tag, 2.0)
    body = bytes([0, 0x77, 0, 0, 0])
    reply = decode_response(ch.transceive_raw(body + crc_x25(body).to_bytes(2, "little"), tag))
    assert reply.error_code is ErrorCode.UNKNOWN_COMMAND


@pytest.mark.parametrize("p", [-0.1, 1.5])
def test_config_rejects_bad_probability(p):
    with pytest.raises(ValueError):
        ChannelConfig(drop_probability=p)
