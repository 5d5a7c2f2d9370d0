"""Build gzipped IDX files from the 5,000-image MNIST sample bundled with mlxtend.

The sample holds 500 images per digit. It is split per class into 400 training
and 100 test images, shuffled with a fixed seed, and written under the
canonical MNIST filenames so ``memstoch`` can load it like the full set.

Usage:
    pip download --no-deps mlxtend -d /tmp/mlxtend
    python scripts/make_mnist_subset.py /tmp/mlxtend/mlxtend-*.whl data/mnist-5k
"""

import argparse
import gzip
import io
import zipfile
from pathlib import Path

import numpy as np

from memstoch.data import TEST_FILES, TRAIN_FILES, write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_sample(source: Path) -> tuple[np.ndarray, np.ndarray]:
    if source.suffix == ".whl":
        raw = zipfile.ZipFile(source).read(MEMBER)
    else:
        raw = source.read_bytes()
    table = np.loadtxt(io.BytesIO(gzip.decompress(raw)), delimiter=",")
    return table[:, :-1].astype(np.uint8), table[:, -1].astype(np.uint8)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", type=Path, help="mlxtend wheel or mnist_5k.csv.gz")
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--test-per-class", type=int, default=100)
    ap.add_argument("--seed", type=int, default=20180501)
    args = ap.parse_args()

    images, labels = read_sample(args.source)
    rng = np.random.default_rng(args.seed)
    train_idx, test_idx = [], []
    for c in range(10):
        idx = rng.permutation(np.flatnonzero(labels == c))
        test_idx.append(idx[:args.test_per_class])
        train_idx.append(idx[args.test_per_class:])
    train_idx = rng.permutation(np.concatenate(train_idx))
    test_idx = rng.permutation(np.concatenate(test_idx))

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for idx, (img_name, lab_name) in ((train_idx, TRAIN_FILES), (test_idx, TEST_FILES)):
        write_idx(images[idx], labels[idx], args.out_dir / f"{img_name}.gz",
                  args.out_dir / f"{lab_name}.gz", compress=True)
    print(f"wrote {len(train_idx)} train / {len(test_idx)} test images to {args.out_dir}")


if __name__ == "__main__":
    main()
