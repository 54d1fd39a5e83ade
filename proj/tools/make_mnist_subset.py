#!/usr/bin/env python3
"""Build the stratified MNIST desk-scale fixture used by the acceptance suite.

Source: the digit JSON files shipped in the `mnist` npm package
(https://www.npmjs.com/package/mnist, `src/digits/<d>.json`), which hold
10,000 MNIST digits as 784-float rows normalized to three decimals.
Every value is an exact byte / 255 rounded, so the original bytes are
recovered with round(v * 255).

Output (IDX, big-endian):
  train-images-idx3-ubyte / train-labels-idx1-ubyte   600 per class -> 6000
  t10k-images-idx3-ubyte  / t10k-labels-idx1-ubyte    100 per class -> 1000

Usage:
  npm pack mnist && tar xzf mnist-*.tgz
  python3 tools/make_mnist_subset.py package/src/digits tests/fixtures/mnist_subset
"""
import json
import random
import struct
import sys
from pathlib import Path

TRAIN_PER_CLASS = 600
TEST_PER_CLASS = 100
SIDE = 28


def write_idx(out_dir, prefix, rows):
    images = bytearray(struct.pack(">IIII", 0x00000803, len(rows), SIDE, SIDE))
    labels = bytearray(struct.pack(">II", 0x00000801, len(rows)))
    for label, pixels in rows:
        images.extend(pixels)
        labels.append(label)
    (out_dir / f"{prefix}-images-idx3-ubyte").write_bytes(images)
    (out_dir / f"{prefix}-labels-idx1-ubyte").write_bytes(labels)


def main():
    src, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)
    train, test = [], []
    for digit in range(10):
        flat = json.loads((src / f"{digit}.json").read_text())["data"]
        n = len(flat) // (SIDE * SIDE)
        assert n >= TRAIN_PER_CLASS + TEST_PER_CLASS, (digit, n)
        for i in range(TRAIN_PER_CLASS + TEST_PER_CLASS):
            row = flat[i * SIDE * SIDE:(i + 1) * SIDE * SIDE]
            pixels = bytes(int(round(v * 255)) for v in row)
            (train if i < TRAIN_PER_CLASS else test).append((digit, pixels))
    rng = random.Random(20231016)
    rng.shuffle(train)
    rng.shuffle(test)
    write_idx(out_dir, "train", train)
    write_idx(out_dir, "t10k", test)


if __name__ == "__main__":
    main()
