#!/usr/bin/env python3
"""Build the small MNIST IDX fixture used by the MNIST training checks.

The 5000-image MNIST subset shipped inside the mlxtend wheel is converted to
an IDX3 image file (magic 0x00000803, u8 pixels). Usage:

    pip download mlxtend --no-deps -d /tmp/mlx
    python3 scripts/make_mnist_fixture.py /tmp/mlx/mlxtend-*.whl data/mnist-1200-images-idx3-ubyte 1200
"""
import gzip
import struct
import sys
import zipfile


def main():
    wheel, out, count = sys.argv[1], sys.argv[2], int(sys.argv[3])
    raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    rows = gzip.decompress(raw).decode().splitlines()
    # The subset is grouped by label; interleave so any prefix covers all digits.
    by_label = {}
    for line in rows:
        fields = line.split(",")
        by_label.setdefault(int(float(fields[-1])), []).append(
            bytes(int(float(v)) for v in fields[:-1])
        )
    images = []
    i = 0
    while len(images) < count:
        for label in sorted(by_label):
            if i < len(by_label[label]) and len(images) < count:
                images.append(by_label[label][i])
        i += 1
    with open(out, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(img)


if __name__ == "__main__":
    main()
