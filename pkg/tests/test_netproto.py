import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coded_inference import netproto
from coded_inference.errors import ProtocolError
from coded_inference.netproto import ErrorCode, Frame, MsgType


class TestFrameLayout:
    def test_header_is_18_bytes(self):
        assert netproto.HEADER_SIZE == 18

    def test_exact_bytes_of_a_known_frame(self):
        # magic, version, type, u64 request id, u32 length, all little-endian
        raw = netproto.encode_frame(Frame(MsgType.HELLO, 0x0102, b"ab"))
        assert raw[:4] == b"AXIF"
        assert raw[4] == 1
        assert raw[5] == 1
        assert raw[6:14] == (0x0102).to_bytes(8, "little")
        assert raw[14:18] == (2).to_bytes(4, "little")
        assert raw[18:] == b"ab"

    def test_concatenated_frames_parse_in_sequence(self):
        a = Frame(MsgType.PING, 1, b"x")
        b = Frame(MsgType.HELLO, 2, b"")
        buf = netproto.encode_frame(a) + netproto.encode_frame(b)
        first, used = netproto.decode_frame(buf)
        second, used2 = netproto.decode_frame(buf[used:])
        assert (first, second) == (a, b)
        assert used + used2 == len(buf)


class TestFrameRoundTrip:
    @given(
        msg_type=st.sampled_from(list(MsgType)),
        request_id=st.integers(min_value=0, max_value=2**64 - 1),
        payload=st.binary(max_size=512),
    )
    def test_identity_on_random_frames(self, msg_type, request_id, payload):
        frame = Frame(msg_type, request_id, payload)
        decoded, consumed = netproto.decode_frame(netproto.encode_frame(frame))
        assert decoded == frame
        assert consumed == netproto.HEADER_SIZE + len(payload)

    def test_rejects_out_of_range_request_id(self):
        with pytest.raises(ProtocolError):
            netproto.encode_frame(Frame(MsgType.PING, -1))
        with pytest.raises(ProtocolError):
            netproto.encode_frame(Frame(MsgType.PING, 2**64))


class TestFrameRejection:
    def test_bad_magic(self):
        raw = bytearray(netproto.encode_frame(Frame(MsgType.PING, 0)))
        raw[0:4] = b"FIXA"
        with pytest.raises(ProtocolError, match="magic"):
            netproto.decode_frame(bytes(raw))

    def test_bad_version(self):
        raw = bytearray(netproto.encode_frame(Frame(MsgType.PING, 0)))
        raw[4] = 9
        with pytest.raises(ProtocolError, match="version"):
            netproto.decode_frame(bytes(raw))

    def test_unknown_message_type(self):
        raw = bytearray(netproto.encode_frame(Frame(MsgType.PING, 0)))
        raw[5] = 200
        with pytest.raises(ProtocolError, match="type"):
            netproto.decode_frame(bytes(raw))

    def test_truncated_header_and_payload(self):
        raw = netproto.encode_frame(Frame(MsgType.PING, 0, b"abcd"))
        with pytest.raises(ProtocolError, match="header"):
            netproto.decode_frame(raw[:10])
        with pytest.raises(ProtocolError, match="payload"):
            netproto.decode_frame(raw[:-1])

    def test_oversized_declared_payload(self):
        raw = bytearray(netproto.encode_frame(Frame(MsgType.PING, 0)))
        raw[14:18] = (netproto.MAX_PAYLOAD + 1).to_bytes(4, "little")
        with pytest.raises(ProtocolError, match="cap"):
            netproto.decode_frame(bytes(raw))


class TestVectorPayload:
    @given(
        st.lists(
            st.floats(allow_nan=False, width=64),
            min_size=0,
            max_size=64,
        )
    )
    def test_round_trip_is_bit_exact(self, values):
        arr = np.asarray(values, dtype=np.float64)
        back = netproto.unpack_vector(netproto.pack_vector(arr))
        assert back.dtype == np.float64
        np.testing.assert_array_equal(back, arr)
        # signed zero must survive the wire
        assert np.array_equal(np.signbit(back), np.signbit(arr))

    def test_layout_count_then_floats(self):
        payload = netproto.pack_vector(np.array([1.0, -2.5]))
        assert payload[:4] == (2).to_bytes(4, "little")
        assert len(payload) == 4 + 16

    def test_rejects_malformed(self):
        with pytest.raises(ProtocolError):
            netproto.unpack_vector(b"\x01")
        good = netproto.pack_vector(np.array([1.0]))
        with pytest.raises(ProtocolError):
            netproto.unpack_vector(good + b"\x00")
        with pytest.raises(ProtocolError):
            netproto.pack_vector(np.zeros((2, 2)))


class TestErrorPayload:
    @given(
        code=st.sampled_from(list(ErrorCode)),
        message=st.text(max_size=100),
    )
    def test_round_trip(self, code, message):
        got_code, got_message = netproto.unpack_error(netproto.pack_error(code, message))
        assert got_code == code
        assert got_message == message

    def test_rejects_empty(self):
        with pytest.raises(ProtocolError):
            netproto.unpack_error(b"\x01")
