import random
import struct
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sarsim.comms import (
    FRAME_LEN,
    PAYLOAD_LEN,
    Arbitration,
    Broadcaster,
    ChecksumError,
    CodecError,
    CoordMessage,
    DropZoneArbiter,
    EncodeError,
    FramingError,
    LengthError,
    LinkModel,
    PeerTable,
    PeerView,
    ReceiveStats,
    SimNetwork,
    StateSnapshot,
    UdpTransport,
    arbitrate,
    broadcast_loop,
    crc16_x25,
    decode,
    decode_frame,
    encode,
    encode_payload,
    parse_address,
    receive_into,
    snapshot_message,
)
from sarsim.fsm import MissionState
from sarsim.geometry import EnuPosition, GeoPoint, Rect, enu_to_geo

S = MissionState
ORIGIN = GeoPoint(22.3, 39.1)
ZONE = Rect(40, 25, 50, 35)


def crc_bitwise(data: bytes) -> int:
    """Bit-at-a-time CRC-16/X.25, written from the parameter set alone."""
    crc = 0xFFFF
    for byte in data:
        for i in range(8):
            bit = (byte >> i) & 1
            mix = (crc ^ bit) & 1
            crc >>= 1
            if mix:
                crc ^= 0x8408
    return crc ^ 0xFFFF


def random_message(rng: random.Random) -> CoordMessage:
    return CoordMessage(
        rng.randint(0, 255),
        rng.randint(-900_000_000, 900_000_000) / 1e7,
        rng.randint(-1_800_000_000, 1_799_999_999) / 1e7,
        rng.choice(list(MissionState)),
        rng.randint(0, 0xFFFFFFFF),
    )


def test_crc_check_value():
    assert crc16_x25(b"123456789") == 0x906E


def test_crc_matches_bitwise_oracle():
    rng = random.Random(1)
    for _ in range(500):
        data = bytes(rng.randrange(256) for _ in range(rng.randint(0, 40)))
        assert crc16_x25(data) == crc_bitwise(data)


def test_golden_payload():
    msg = CoordMessage(1, 22.3, 39.1, S.ObjectSearch, 5000)
    assert encode_payload(msg).hex(" ") == "01 c0 b5 4a 0d c0 2f 4e 17 02 88 13 00 00"
    assert msg.lat_e7 == 223_000_000 and msg.lon_e7 == 391_000_000


def test_frame_layout():
    msg = CoordMessage(3, 22.3, 39.1, S.Drop, 1234)
    f = encode(msg, 300, message_id=200)
    assert len(f) == FRAME_LEN == 22
    assert f[0] == 0xFE and f[1] == PAYLOAD_LEN == 14
    assert f[2] == 300 % 256 and f[3] == 3 and f[4] == 1 and f[5] == 200
    assert f[6:20] == encode_payload(msg)
    assert struct.unpack("<H", f[20:22])[0] == crc_bitwise(f[1:20])
    fr = decode_frame(f)
    assert (fr.sequence, fr.system_id, fr.component_id, fr.message_id) == (44, 3, 1, 200)


def test_round_trip_10k():
    rng = random.Random(7)
    for i in range(10_000):
        m = random_message(rng)
        f = encode(m, i)
        assert len(f) == 22
        assert decode(f) == m


@settings(max_examples=200)
@given(
    st.integers(0, 255),
    st.integers(-900_000_000, 900_000_000),
    st.integers(-1_800_000_000, 1_799_999_999),
    st.sampled_from(list(MissionState)),
    st.integers(0, 2**32 - 1),
)
def test_round_trip_property(uid, lat, lon, state, ts):
    m = CoordMessage(uid, lat / 1e7, lon / 1e7, state, ts)
    assert decode(encode(m, 0)) == m


@pytest.mark.parametrize(
    "msg",
    [
        CoordMessage(1, 91.0, 0.0, S.Drop, 0),
        CoordMessage(1, 0.0, 180.0, S.Drop, 0),
        CoordMessage(256, 0.0, 0.0, S.Drop, 0),
        CoordMessage(1, 0.0, 0.0, S.Drop, -1),
        CoordMessage(1, 0.0, 0.0, S.Drop, 2**32),
        CoordMessage(1, 0.0, 0.0, 42, 0),
    ],
)
def test_encode_range_errors(msg):
    with pytest.raises(EncodeError):
        encode(msg, 0)


def test_exhaustive_single_byte_corruption():
    f = encode(CoordMessage(2, 22.3001, 39.1002, S.WaitingToDrop, 77_000), 5)
    count = 0
    for pos in range(1, 20):
        for delta in range(1, 256):
            bad = bytearray(f)
            bad[pos] ^= delta
            with pytest.raises(CodecError) as exc:
                decode(bytes(bad))
            # only the length byte may trip the length check; all else is the CRC
            assert isinstance(exc.value, (ChecksumError, LengthError, FramingError))
            count += 1
    assert count == 19 * 255


def test_crc_corruption_detection_corpus():
    rng = random.Random(3)
    for _ in range(100):
        f = encode(random_message(rng), rng.randrange(256))
        for pos in range(1, 22):
            for delta in range(1, 256):
                bad = bytearray(f)
                bad[pos] ^= delta
                with pytest.raises(CodecError):
                    decode(bytes(bad))
        # every two-bit adjacent burst over the checked bytes and the CRC itself
        bits = 21 * 8
        for b in range(8, bits - 1 + 8):
            bad = bytearray(f)
            for k in (b, b + 1):
                bad[k // 8] ^= 1 << (k % 8)
            with pytest.raises(CodecError):
                decode(bytes(bad))


def test_decode_errors():
    f = encode(CoordMessage(1, 0, 0, S.Drop, 0), 0)
    with pytest.raises(FramingError):
        decode(f[:21])
    with pytest.raises(FramingError):
        decode(b"\x00" + f[1:])
    with pytest.raises(FramingError):
        decode(b"")
    body = bytes([13]) + f[2:19]
    odd = b"\xfe" + body + struct.pack("<H", crc16_x25(body))
    with pytest.raises(LengthError):
        decode(odd)
    body = bytearray(f[1:20])
    body[14] = 99  # unknown state code, valid CRC
    framed = b"\xfe" + bytes(body) + struct.pack("<H", crc16_x25(bytes(body)))
    with pytest.raises(CodecError, match="state"):
        decode(framed)


# ------------------------------------------------------------------ peers


def msg(uid, state, pos=(0.0, 0.0), ts=0):
    g = enu_to_geo(EnuPosition(pos[0], pos[1], 5), ORIGIN)
    return CoordMessage(uid, g.lat, g.lon, state, ts)


def views(*entries, received_at=10.0, stale=False):
    return {m.uav_id: PeerView(m, received_at, stale) for m in entries}


def arb(own=1, req=5.0):
    return DropZoneArbiter(own, ZONE, ORIGIN, req)


def test_peer_table():
    t = PeerTable(own_id=1)
    assert not t.update(msg(1, S.Drop), 0.0)
    assert t.update(msg(2, S.Drop), 0.0)
    assert t.update(msg(2, S.ObjectSearch), 1.0)
    assert len(t) == 1
    assert t.get(2).message.mission_state is S.ObjectSearch
    assert not t.snapshot(2.9)[2].stale
    assert t.snapshot(3.01)[2].stale


def test_arbitrate_examples():
    far = (5.0, 5.0)
    assert arbitrate(arb(), views(msg(2, S.ObjectSearch, far)), 11.0) is Arbitration.Granted
    assert arbitrate(arb(), {}, 11.0) is Arbitration.Granted
    assert arbitrate(arb(), views(msg(2, S.Drop, far)), 11.0) is Arbitration.Denied
    assert arbitrate(arb(req=None), {}, 11.0) is Arbitration.Denied


def test_arbitrate_two_waiter_orderings():
    far = (5.0, 5.0)
    cases = [
        (5000, 1, 4000, 2, Arbitration.Denied),  # own later
        (4000, 1, 5000, 2, Arbitration.Granted),  # own earlier
        (5000, 1, 5000, 2, Arbitration.Granted),  # tie, own id lower
        (5000, 2, 5000, 1, Arbitration.Denied),  # tie, own id higher
    ]
    for own_ms, own_id, peer_ms, peer_id, want in cases:
        a = DropZoneArbiter(own_id, ZONE, ORIGIN, own_ms / 1000)
        peers = views(msg(peer_id, S.WaitingToDrop, far, peer_ms))
        assert arbitrate(a, peers, 11.0) is want, (own_ms, own_id, peer_ms, peer_id)


def test_arbitrate_position_rule_and_margin():
    inside = views(msg(2, S.ObjectSearch, (45, 30)))
    assert arbitrate(arb(), inside, 11.0) is Arbitration.Denied
    in_margin = views(msg(2, S.GoToDrop, (51.5, 30)))
    assert arbitrate(arb(), in_margin, 11.0) is Arbitration.Denied
    outside = views(msg(2, S.GoToDrop, (52.5, 30)))
    assert arbitrate(arb(), outside, 11.0) is Arbitration.Granted
    # landed UAVs sitting under the zone are on the ground, not in the way
    assert arbitrate(arb(), views(msg(2, S.Landed, (45, 30))), 11.0) is Arbitration.Granted


def test_stale_peers_are_assumed_clear():
    peers = views(msg(2, S.Drop, (45, 30)), stale=True)
    assert arbitrate(arb(), peers, 11.0) is Arbitration.Granted


def test_grant_waits_for_fresh_news_after_request():
    # the peer's latest news predates our request plus the settle window
    peers = views(msg(2, S.ObjectSearch, (5, 5)), received_at=5.3)
    assert arbitrate(arb(req=5.0), peers, 5.4) is Arbitration.Denied
    peers = views(msg(2, S.ObjectSearch, (5, 5)), received_at=5.6)
    assert arbitrate(arb(req=5.0), peers, 5.7) is Arbitration.Granted


def test_at_most_one_grant_among_waiters():
    rng = random.Random(9)
    for _ in range(500):
        n = rng.randint(2, 5)
        reqs = {i: rng.randint(0, 3) * 100 for i in range(1, n + 1)}
        msgs = {i: msg(i, S.WaitingToDrop, (60, 30), reqs[i]) for i in reqs}
        grants = []
        for i in reqs:
            a = DropZoneArbiter(i, ZONE, ORIGIN, reqs[i] / 1000)
            peers = {j: PeerView(m, 10.0, False) for j, m in msgs.items() if j != i}
            if arbitrate(a, peers, 10.0) is Arbitration.Granted:
                grants.append(i)
        assert grants == [min(reqs, key=lambda i: (reqs[i], i))]


def test_peer_table_concurrent_reader_sees_whole_records():
    t = PeerTable(own_id=1)
    stop = threading.Event()
    torn = []

    def writer():
        k = 0
        while not stop.is_set():
            k += 1
            t.update(CoordMessage(2, 0.0, 0.0, S.ObjectSearch, k), float(k))

    th = threading.Thread(target=writer)
    th.start()
    try:
        for _ in range(5000):
            rec = t.get(2)
            if rec is not None and rec.received_at != float(rec.message.timestamp_ms):
                torn.append(rec)
    finally:
        stop.set()
        th.join()
    assert not torn


# -------------------------------------------------------------- transport


def test_link_model_validation():
    with pytest.raises(ValueError):
        LinkModel(loss=1.5)
    with pytest.raises(ValueError):
        LinkModel(latency_s=-1)


def test_sim_network_latency_and_fanout():
    net = SimNetwork(seed=1, default_link=LinkModel(latency_s=0.2))
    a, b, c = net.endpoint(1), net.endpoint(2), net.endpoint(3)
    a.send(b"x", 1.0)
    assert b.receive(1.1) == [] and c.receive(1.1) == []
    assert b.receive(1.2) == [b"x"] and c.receive(1.25) == [b"x"]
    assert a.receive(5.0) == []


def test_sim_network_loss_rate_and_determinism():
    def run(seed):
        net = SimNetwork(seed=seed, default_link=LinkModel(loss=0.3))
        a, b = net.endpoint(1), net.endpoint(2)
        got = []
        for k in range(5000):
            a.send(bytes([k % 256]), k * 0.1)
            got.extend(b.receive(k * 0.1))
        return got, net.dropped

    got, dropped = run(4)
    assert 0.27 < dropped / 5000 < 0.33
    assert run(4) == (got, dropped)
    assert run(5) != (got, dropped)


def test_adding_a_node_keeps_existing_link_patterns():
    def pattern(extra):
        net = SimNetwork(seed=2, default_link=LinkModel(loss=0.5))
        a, b = net.endpoint(1), net.endpoint(2)
        if extra:
            net.endpoint(3)
        out = []
        for k in range(200):
            a.send(bytes([k]), float(k))
            out.append(len(b.receive(float(k))))
        return out

    assert pattern(False) == pattern(True)


def test_per_link_override():
    net = SimNetwork(seed=0)
    a, b, c = net.endpoint(1), net.endpoint(2), net.endpoint(3)
    net.set_link(1, 2, LinkModel(loss=1.0))
    a.send(b"q", 0.0)
    assert b.receive(1.0) == [] and c.receive(1.0) == [b"q"]


def test_parse_address():
    assert parse_address("5000") == ("127.0.0.1", 5000)
    assert parse_address("10.0.0.2:14550") == ("10.0.0.2", 14550)
    assert parse_address(":7") == ("127.0.0.1", 7)


def test_udp_loopback_smoke():
    with UdpTransport() as rx, UdpTransport(peers=[]) as tx:
        tx.add_peer(rx.address)
        f = encode(CoordMessage(4, 22.3, 39.1, S.GoToDrop, 9), 0)
        tx.send(f)
        got = []
        for _ in range(200):
            got = rx.receive()
            if got:
                break
            threading.Event().wait(0.005)
        assert got == [f]


def test_udp_bind_from_environment(monkeypatch):
    probe = UdpTransport()
    port = probe.address[1]
    probe.close()
    monkeypatch.setenv("SARSIM_BIND", f"127.0.0.1:{port}")
    with UdpTransport() as t:
        assert t.address == ("127.0.0.1", port)


# -------------------------------------------------------------- broadcast


def _snap(state=S.ObjectSearch, t=0):
    return lambda: StateSnapshot(2, EnuPosition(10, 20, 8), state, t)


def test_one_second_gives_ten_frames_in_sequence():
    net = SimNetwork()
    tx, rx = net.endpoint(2), net.endpoint(1)
    b = Broadcaster(tx, ORIGIN, period_ms=100)
    frames = []
    for k in range(20):  # 50 ms ticks over one second
        f = b.poll(k * 0.05, _snap())
        if f is not None:
            frames.append(f)
    assert len(frames) == 10
    assert [decode_frame(f).sequence for f in frames] == list(range(10))
    table = PeerTable(own_id=1)
    receive_into(table, rx, 1.0)
    assert table.get(2).message == decode(encode(snapshot_message(_snap()(), ORIGIN), 0))


def test_broadcast_send_failure_is_logged_and_survived(caplog):
    class Broken:
        def send(self, frame, now):
            raise OSError("network down")

    b = Broadcaster(Broken(), ORIGIN)
    assert b.poll(0.0, _snap()) is not None
    assert b.poll(0.1, _snap()) is not None
    assert b.failures == 2 and b.seq == 2
    assert "broadcast failed" in caplog.text


def test_broadcast_loop_with_fake_clock():
    clock = [0.0]

    def sleep(dt):
        clock[0] += max(dt, 0.001)

    net = SimNetwork()
    b = broadcast_loop(_snap(), net.endpoint(2), ORIGIN, 100, max_frames=10,
                       clock=lambda: clock[0], sleep=sleep)
    assert b.sent == 10 and b.seq == 10
    # the tenth frame goes out at 0.9 s and the loop then sleeps out that period
    assert clock[0] == pytest.approx(1.0, abs=0.01)


def test_converges_under_30_percent_loss():
    net = SimNetwork(seed=11, default_link=LinkModel(loss=0.3))
    tx, rx = net.endpoint(2), net.endpoint(1)
    b = Broadcaster(tx, ORIGIN, period_ms=100)
    table = PeerTable(own_id=1)
    stats = ReceiveStats()
    stale_seen = False
    states = [S.ObjectSearch, S.ObjectPicking, S.GoToDrop]
    for k in range(600):  # 60 s at 100 ms
        now = k * 0.1
        state = states[min(k // 200, 2)]
        b.poll(now, _snap(state, int(now * 1000)))
        receive_into(table, rx, now, stats)
        if k > 5 and table.snapshot(now)[2].stale:
            stale_seen = True
    assert table.get(2).message.mission_state is S.GoToDrop
    assert 0.6 < stats.received / 600 < 0.8
    # with a 2 s timeout a stale flag needs 20 losses in a row, which this seed never has
    assert not stale_seen


def test_corrupt_frames_are_counted_and_dropped():
    table = PeerTable(own_id=1)

    class Canned:
        def __init__(self, frames):
            self.frames = frames

        def receive(self, now):
            out, self.frames = self.frames, []
            return out

    good = encode(CoordMessage(2, 22.3, 39.1, S.Drop, 1), 0)
    bad = bytearray(good)
    bad[8] ^= 0x40
    echo = encode(CoordMessage(1, 22.3, 39.1, S.Drop, 1), 0)
    stats = ReceiveStats()
    got = receive_into(table, Canned([bytes(bad), good, echo]), 0.0, stats)
    assert [m.uav_id for m in got] == [2]
    assert (stats.received, stats.corrupt, stats.foreign) == (1, 1, 1)
