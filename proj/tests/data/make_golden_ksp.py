"""Writes golden_2coil_8x8.ksp, the hand-built KSP1 file read by the unit tests.

Contents (c = coil, i = row, j = column):
  kspace     c64le [2, 8, 8]  re = c + 0.5 i, im = 0.25 j - 1
  sens       c64le [2, 8, 8]  coil 0 = 0.6 + 0i, coil 1 = 0 + 0.8i
  reference  f32le [8, 8]     (8 i + j) / 64
  id         u8    [6]        "golden"
"""
import json
import struct
from pathlib import Path


def main() -> None:
    kspace = b"".join(
        struct.pack("<ff", c + 0.5 * i, 0.25 * j - 1.0) for c in range(2) for i in range(8) for j in range(8)
    )
    sens = b"".join(
        struct.pack("<ff", *((0.6, 0.0) if c == 0 else (0.0, 0.8))) for c in range(2) for _ in range(64)
    )
    reference = b"".join(struct.pack("<f", (8 * i + j) / 64.0) for i in range(8) for j in range(8))
    ident = b"golden"

    payloads = [
        ("kspace", "c64le", [2, 8, 8], kspace),
        ("sens", "c64le", [2, 8, 8], sens),
        ("reference", "f32le", [8, 8], reference),
        ("id", "u8", [6], ident),
    ]
    sections, offset = [], 0
    for name, dtype, shape, data in payloads:
        sections.append({"name": name, "dtype": dtype, "shape": shape, "offset": offset, "length": len(data)})
        offset += len(data)
    header = json.dumps({"version": 1, "sections": sections}, separators=(",", ":")).encode()
    blob = b"KSP1" + struct.pack("<I", len(header)) + header + b"".join(p[3] for p in payloads)
    Path(__file__).with_name("golden_2coil_8x8.ksp").write_bytes(blob)


if __name__ == "__main__":
    main()
