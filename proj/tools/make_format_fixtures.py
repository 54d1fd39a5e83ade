#!/usr/bin/env python3
"""Writes the small IDX and CIFAR-10 fixture files under tests/fixtures/formats.

Byte layouts (the unit tests restate these values independently):

idx/three-images-idx3-ubyte   magic 0x00000803, N=3, 28x28;
                              pixel (i, r, c) = (r * 28 + c + 37 * i) % 256
idx/three-labels-idx1-ubyte   magic 0x00000801, N=3, labels 7, 0, 9
idx/two-labels-idx1-ubyte     valid labels file with N=2 (count mismatch)
idx/truncated-images-idx3-ubyte  header claims N=3, payload holds 2 images
cifar/two-records.bin         record 0: label 3, R plane 10, G plane 20, B plane 30,
                                        except R at (0, 0) = 255
                              record 1: label 9, byte k of the image = k % 256
cifar/black.bin               one record, label 0, all pixels 0
cifar/missing-label.bin       3072 bytes (an image without its label byte)
cifar/bad-label.bin           one record with label byte 10

Usage: python3 tools/make_format_fixtures.py [repo_root]
"""
import os
import struct
import sys

root = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..")
base = os.path.join(root, "tests", "fixtures", "formats")
os.makedirs(os.path.join(base, "idx"), exist_ok=True)
os.makedirs(os.path.join(base, "cifar"), exist_ok=True)


def write(rel, data):
    with open(os.path.join(base, rel), "wb") as f:
        f.write(data)


def idx_images(n_header, images):
    out = struct.pack(">IIII", 0x00000803, n_header, 28, 28)
    for img in images:
        out += bytes(img)
    return out


images = [[(r * 28 + c + 37 * i) % 256 for r in range(28) for c in range(28)] for i in range(3)]
write("idx/three-images-idx3-ubyte", idx_images(3, images))
write("idx/three-labels-idx1-ubyte", struct.pack(">II", 0x00000801, 3) + bytes([7, 0, 9]))
write("idx/two-labels-idx1-ubyte", struct.pack(">II", 0x00000801, 2) + bytes([1, 2]))
write("idx/truncated-images-idx3-ubyte", idx_images(3, images[:2]))

rec0 = bytearray([3] + [10] * 1024 + [20] * 1024 + [30] * 1024)
rec0[1] = 255
rec1 = bytearray([9] + [k % 256 for k in range(3072)])
write("cifar/two-records.bin", bytes(rec0 + rec1))
write("cifar/black.bin", bytes(3073))
write("cifar/missing-label.bin", bytes(3072))
write("cifar/bad-label.bin", bytes([10] + [0] * 3072))
