#!/usr/bin/env python3
# Copyright 2026 The LieGConv Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Convert the digits bundled in the `mnist` npm package to gzipped IDX files.

The npm package (`npm pack mnist`) ships 10,000 MNIST digits as JSON arrays of
normalised pixels. This writes them, shuffled with a fixed seed, as
`<out>/mnist10k-images-idx3-ubyte.gz` and `<out>/mnist10k-labels-idx1-ubyte.gz`.

usage: convert_npm_mnist.py mnist-1.1.0.tgz data/
"""
import gzip
import json
import struct
import sys
import tarfile

import numpy as np


def main(tgz_path, out_dir):
    images, labels = [], []
    with tarfile.open(tgz_path) as tar:
        for digit in range(10):
            member = tar.extractfile(f"package/src/digits/{digit}.json")
            flat = np.asarray(json.load(member)["data"], dtype=np.float64)
            pix = np.clip(np.rint(flat * 255.0), 0, 255).astype(np.uint8).reshape(-1, 28, 28)
            images.append(pix)
            labels.append(np.full(len(pix), digit, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.default_rng(0).permutation(len(labels))
    images, labels = images[order], labels[order]

    with gzip.GzipFile(f"{out_dir}/mnist10k-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.write(images.tobytes())
    with gzip.GzipFile(f"{out_dir}/mnist10k-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(labels.tobytes())
    print(f"wrote {len(labels)} digits to {out_dir}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
