"""Writes tests/data/golden.tskd with the struct module only."""
import struct
import sys

TENSORS = [
    ("conv1.kernel", [2, 1, 2, 2], [0.5, -1.25, 3.0, 0.0, -0.0, 1e-8, 65504.0, -2.5]),
    ("fc.bias", [3], [0.1, 0.2, 0.3]),
    ("lstm0.w_xi", [1, 1, 1, 1], [float("inf")]),
]


def encode():
    out = bytearray(b"TSKD")
    out += struct.pack("<II", 1, len(TENSORS))
    for name, shape, values in TENSORS:
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<B", len(shape))
        out += struct.pack("<%dQ" % len(shape), *shape)
        out += struct.pack("<%df" % len(values), *values)
    return bytes(out)


if __name__ == "__main__":
    with open(sys.argv[1], "wb") as f:
        f.write(encode())
