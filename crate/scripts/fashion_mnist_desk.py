"""Build the desk-scale Fashion-MNIST IDX fixture from the npm `fashion-mnist` package.

The package ships every image of each class as `src/clothes/<class>.json`
(`{"data": [[784 bytes], ...]}`), train and test concatenated. The fixture
takes the first TRAIN images of each class as the training split and the
last TEST images as the test split; the two are disjoint.

    npm pack fashion-mnist@1.1.0 && tar xzf fashion-mnist-1.1.0.tgz
    python3 scripts/fashion_mnist_desk.py package data/fashion-mnist-desk
"""

import json
import struct
import sys
from pathlib import Path

CLASSES = (0, 1, 2)
TRAIN = 300
TEST = 150


def write_idx(prefix: Path, images, labels):
    with open(f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    with open(f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def main(package: str, out: str):
    root = Path(package) / "src" / "clothes"
    dest = Path(out)
    dest.mkdir(parents=True, exist_ok=True)
    train, test = ([], []), ([], [])
    for c in CLASSES:
        # Class 0 carries two empty placeholder entries; drop them.
        data = [img for img in json.loads((root / f"{c}.json").read_text())["data"] if img]
        assert all(len(img) == 784 and 0 <= min(img) and max(img) <= 255 for img in data)
        for split, chunk in ((train, data[:TRAIN]), (test, data[-TEST:])):
            split[0].extend(chunk)
            split[1].extend([c] * len(chunk))
    write_idx(dest / "train", *train)
    write_idx(dest / "test", *test)


if __name__ == "__main__":
    main(*sys.argv[1:3])
