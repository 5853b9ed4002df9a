"""Wire protocol v1 for out-of-process denoisers, plus the client.

Framing (bit-exact): every message is an 8-byte little-endian unsigned
payload length followed by the payload. The payload starts with one UTF-8
JSON header line terminated by a newline:

    {"h": int, "w": int, "bands": 13, "dtype": "f32",
     "kind": "denoise_request" | "denoise_response" | "error"}

and continues with raw little-endian IEEE-754 float32 data:

    request  = h*w real values, h*w imaginary values, 13 band sds
    response = h*w real values, h*w imaginary values (denoised)
    error    = UTF-8 JSON body {"message": str} instead of float data

Endpoints: "host:port" for TCP, anything containing a path separator (or
prefixed "unix:") for a unix stream socket. One request in flight at a time.
"""

import json
import socket
import struct

import numpy as np

NUM_BANDS = 13
_LEN = struct.Struct("<Q")
MAX_PAYLOAD = 1 << 31


class BridgeError(Exception):
    """Base class for bridge failures (CLI exit code 4)."""


class BridgeConnectionError(BridgeError):
    pass


class BridgeTimeoutError(BridgeError):
    pass


class BridgeProtocolError(BridgeError):
    pass


class BridgeDimensionError(BridgeError):
    pass


class BridgeRemoteError(BridgeError):
    """The server answered with kind 'error'."""


def encode_message(kind, h, w, body):
    """Frame one message; body is raw bytes after the header line."""
    header = json.dumps(
        {"h": int(h), "w": int(w), "bands": NUM_BANDS, "dtype": "f32", "kind": kind},
        separators=(",", ":"),
    ).encode("utf-8") + b"\n"
    payload = header + body
    return _LEN.pack(len(payload)) + payload


def encode_request(image, band_sds):
    image = np.asarray(image, dtype=np.complex128)
    band_sds = np.asarray(band_sds, dtype=float)
    if band_sds.shape != (NUM_BANDS,):
        raise ValueError(f"expected {NUM_BANDS} band standard deviations")
    h, w = image.shape
    body = (
        image.real.astype("<f4").tobytes()
        + image.imag.astype("<f4").tobytes()
        + band_sds.astype("<f4").tobytes()
    )
    return encode_message("denoise_request", h, w, body)


def encode_response(image):
    image = np.asarray(image, dtype=np.complex128)
    h, w = image.shape
    body = image.real.astype("<f4").tobytes() + image.imag.astype("<f4").tobytes()
    return encode_message("denoise_response", h, w, body)


def encode_error(message, h=0, w=0):
    body = json.dumps({"message": str(message)}).encode("utf-8")
    return encode_message("error", h, w, body)


def _recv_exact(sock, count):
    chunks = []
    while count:
        try:
            chunk = sock.recv(min(count, 1 << 20))
        except socket.timeout as exc:
            raise BridgeTimeoutError("timed out waiting for bridge data") from exc
        if not chunk:
            raise BridgeConnectionError("bridge connection closed mid-message")
        chunks.append(chunk)
        count -= len(chunk)
    return b"".join(chunks)


def read_message(sock):
    """Read one framed message from a socket; returns (header dict, body bytes)."""
    length = _LEN.unpack(_recv_exact(sock, 8))[0]
    if length > MAX_PAYLOAD:
        raise BridgeProtocolError(f"payload length {length} exceeds limit")
    payload = _recv_exact(sock, length)
    newline = payload.find(b"\n")
    if newline < 0:
        raise BridgeProtocolError("missing header line terminator")
    try:
        header = json.loads(payload[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BridgeProtocolError(f"malformed JSON header: {exc}") from exc
    for key in ("h", "w", "bands", "dtype", "kind"):
        if key not in header:
            raise BridgeProtocolError(f"header missing field {key!r}")
    if header["dtype"] != "f32":
        raise BridgeProtocolError(f"unsupported dtype {header['dtype']!r}")
    return header, payload[newline + 1:]


def decode_request(header, body):
    """Unpack a denoise_request body into (complex image, band sds)."""
    if header["bands"] != NUM_BANDS:
        raise BridgeProtocolError(f"expected {NUM_BANDS} bands, got {header['bands']}")
    h, w = header["h"], header["w"]
    expected = (2 * h * w + NUM_BANDS) * 4
    if len(body) != expected:
        raise BridgeProtocolError(
            f"request body is {len(body)} bytes, expected {expected}"
        )
    data = np.frombuffer(body, dtype="<f4")
    real = data[: h * w].reshape(h, w)
    imag = data[h * w: 2 * h * w].reshape(h, w)
    sds = data[2 * h * w:].astype(float)
    return real.astype(np.float64) + 1j * imag.astype(np.float64), sds


def decode_response(header, body, expect_shape):
    """Unpack a denoise_response into a complex image of expect_shape."""
    if header["kind"] == "error":
        try:
            message = json.loads(body.decode("utf-8")).get("message", "")
        except Exception:
            message = body.decode("utf-8", errors="replace")
        raise BridgeRemoteError(f"bridge server error: {message}")
    if header["kind"] != "denoise_response":
        raise BridgeProtocolError(f"unexpected message kind {header['kind']!r}")
    h, w = header["h"], header["w"]
    if (h, w) != tuple(expect_shape):
        raise BridgeDimensionError(
            f"server returned {h}x{w}, expected {expect_shape[0]}x{expect_shape[1]}"
        )
    expected = 2 * h * w * 4
    if len(body) != expected:
        raise BridgeProtocolError(
            f"response body is {len(body)} bytes, expected {expected}"
        )
    data = np.frombuffer(body, dtype="<f4")
    real = data[: h * w].reshape(h, w)
    imag = data[h * w:].reshape(h, w)
    return real.astype(np.float64) + 1j * imag.astype(np.float64)


def _connect(endpoint, timeout):
    try:
        if endpoint.startswith("unix:") or "/" in endpoint:
            path = endpoint[5:] if endpoint.startswith("unix:") else endpoint
            sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            sock.settimeout(timeout)
            sock.connect(path)
        else:
            host, _, port = endpoint.rpartition(":")
            sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            sock.settimeout(timeout)
            sock.connect((host or "127.0.0.1", int(port)))
        return sock
    except (OSError, ValueError) as exc:
        raise BridgeConnectionError(f"cannot connect to {endpoint!r}: {exc}") from exc


class BridgeDenoiser:
    """Client-side denoiser that forwards each call over the wire protocol.

    One connection, one request in flight; failures surface as distinct
    BridgeError subclasses and are never retried here.
    """

    def __init__(self, endpoint, timeout=60.0):
        self.endpoint = endpoint
        self.timeout = timeout
        self.descriptor = f"bridge({endpoint})"
        self._sock = None

    def _socket(self):
        if self._sock is None:
            self._sock = _connect(self.endpoint, self.timeout)
        return self._sock

    def close(self):
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def denoise(self, image, band_sds):
        image = np.asarray(image, dtype=np.complex128)
        sock = self._socket()
        try:
            sock.sendall(encode_request(image, band_sds))
            header, body = read_message(sock)
        except socket.timeout as exc:
            self.close()
            raise BridgeTimeoutError("bridge request timed out") from exc
        except OSError as exc:
            self.close()
            raise BridgeConnectionError(f"bridge I/O failure: {exc}") from exc
        return decode_response(header, body, image.shape)

    def __call__(self, image, band_sds):
        return self.denoise(image, band_sds)


def serve_loop(endpoint, handle_request, ready_event=None, max_requests=None):
    """Minimal single-threaded protocol server.

    handle_request(image, band_sds) -> image; exceptions are answered with an
    error message. Serves one connection and one request at a time; used by
    the loopback test double and reusable by external denoiser services.
    """
    if endpoint.startswith("unix:") or "/" in endpoint:
        path = endpoint[5:] if endpoint.startswith("unix:") else endpoint
        server = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        server.bind(path)
    else:
        host, _, port = endpoint.rpartition(":")
        server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((host or "127.0.0.1", int(port)))
    server.listen(1)
    if ready_event is not None:
        ready_event.set()
    served = 0
    try:
        while max_requests is None or served < max_requests:
            conn, _ = server.accept()
            with conn:
                while max_requests is None or served < max_requests:
                    try:
                        header, body = read_message(conn)
                        image, sds = decode_request(header, body)
                        conn.sendall(encode_response(handle_request(image, sds)))
                    except BridgeConnectionError:
                        break  # client went away; wait for the next one
                    except BridgeError as exc:
                        conn.sendall(encode_error(exc))
                    except Exception as exc:  # handler failure
                        conn.sendall(encode_error(exc))
                    served += 1
    finally:
        server.close()
