"""Download the four MNIST IDX files for the pixel-sequence task.

The library itself never performs network I/O; run this script explicitly
(or fetch the files any other way) and point `--data` / `data_path` at the
target directory.  Canonical mirrors:

    https://storage.googleapis.com/cvdf-datasets/mnist/
    https://ossci-datasets.s3.amazonaws.com/mnist/

Files (gzipped IDX, big-endian magic 2051 for images / 2049 for labels):

    train-images-idx3-ubyte.gz
    train-labels-idx1-ubyte.gz
    t10k-images-idx3-ubyte.gz
    t10k-labels-idx1-ubyte.gz

Usage: python scripts/fetch_mnist.py [target_dir]
"""

import sys
import urllib.request
from pathlib import Path

MIRRORS = [
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
]
FILES = [
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
]


def main():
    target = Path(sys.argv[1] if len(sys.argv) > 1 else "data/mnist")
    target.mkdir(parents=True, exist_ok=True)
    for name in FILES:
        dest = target / name
        if dest.exists():
            print(f"already present: {dest}")
            continue
        last_error = None
        for mirror in MIRRORS:
            url = mirror + name
            try:
                print(f"fetching {url}")
                urllib.request.urlretrieve(url, dest)
                break
            except OSError as exc:
                last_error = exc
                print(f"  failed: {exc}")
        else:
            print(f"could not download {name}: {last_error}")
            print("fetch the files manually from one of the mirrors above")
            return 1
    print(f"done; pass --data {target} (the loader reads .gz directly)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
