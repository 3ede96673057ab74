#!/usr/bin/env python3
# Copyright 2026 The capadapt Authors.
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
"""Brute-force image feature oracle (luma histogram + 8x8 pooled grid)."""

import argparse
import json
import math
import os
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURE = os.path.join(HERE, "..", "data", "feature_fixtures.json")


def luma(r, g, b):
    return 0.299 * r + 0.587 * g + 0.114 * b


def feature(width, height, pixel):
    ys = [[luma(*pixel(x, y)) for x in range(width)] for y in range(height)]
    hist = [0.0] * 64
    for row in ys:
        for v in row:
            hist[min(63, int(math.floor(v / 4.0)))] += 1.0
    hist = [h / (width * height) for h in hist]
    grid = []
    for gy in range(8):
        r0 = gy * height // 8
        r1 = max((gy + 1) * height // 8, r0 + 1)
        for gx in range(8):
            c0 = gx * width // 8
            c1 = max((gx + 1) * width // 8, c0 + 1)
            cells = [ys[y][x] for y in range(r0, r1) for x in range(c0, c1)]
            grid.append(sum(cells) / len(cells) / 255.0)
    vec = hist + grid
    norm = math.sqrt(sum(v * v for v in vec))
    return [v / norm for v in vec]


def fixtures():
    return {
        "gradient16": (16, 16, lambda x, y: (16 * x, 16 * y, 8 * (x + y))),
        "odd5x3": (5, 3, lambda x, y: (40 * x + 10, 70 * y + 5, 200 - 30 * x)),
        "constant12x9": (12, 9, lambda x, y: (90, 140, 30)),
    }


def build():
    out = {}
    for name, (w, h, px) in fixtures().items():
        out[name] = {"width": w, "height": h,
                     "pixels": [c for y in range(h) for x in range(w) for c in px(x, y)],
                     "feature": feature(w, h, px)}
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--write", action="store_true")
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args()
    data = build()
    if args.write:
        with open(FIXTURE, "w") as f:
            json.dump(data, f, indent=1)
        print("wrote", FIXTURE)
        return 0
    with open(FIXTURE) as f:
        frozen = json.load(f)
    bad = 0
    for name, fx in data.items():
        got = frozen[name]["feature"]
        if len(got) != len(fx["feature"]) or any(abs(a - b) > 1e-12 for a, b in zip(got, fx["feature"])):
            print("mismatch:", name)
            bad += 1
    print("feature fixtures checked, mismatches:", bad)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
