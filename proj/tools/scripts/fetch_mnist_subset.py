#!/usr/bin/env python3
"""Write a 5000-sample MNIST subset as IDX files.

The samples come from the mnist_5k.csv.gz table shipped inside the mlxtend
wheel (784 pixel columns followed by the label, 500 per class, class-sorted).
Rows are shuffled with a fixed seed so that any prefix is class-balanced in
expectation, then written as big-endian IDX (magic 0x803 / 0x801).
"""
import argparse
import glob
import gzip
import os
import random
import struct
import subprocess
import sys
import tempfile
import zipfile


def fetch_csv(workdir):
    subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "--quiet",
                    "-d", workdir, "mlxtend==0.24.0"], check=True)
    wheel = glob.glob(os.path.join(workdir, "mlxtend-*.whl"))[0]
    with zipfile.ZipFile(wheel) as z:
        return gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "..", "data", "mnist"))
    ap.add_argument("--seed", type=int, default=20240917)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        text = fetch_csv(tmp)
    rows = []
    for line in text.splitlines():
        cells = line.strip().split(",")
        if len(cells) != 785:
            continue
        rows.append(([int(c) for c in cells[:784]], int(cells[784])))
    random.Random(args.seed).shuffle(rows)

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "images.idx3-ubyte"), "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(rows), 28, 28))
        for pixels, _ in rows:
            f.write(bytes(pixels))
    with open(os.path.join(args.out, "labels.idx1-ubyte"), "wb") as f:
        f.write(struct.pack(">II", 0x801, len(rows)))
        f.write(bytes(label for _, label in rows))
    print(f"wrote {len(rows)} samples to {os.path.abspath(args.out)}")


if __name__ == "__main__":
    main()
