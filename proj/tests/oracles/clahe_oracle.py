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
"""CLAHE reference outputs on grey images, computed with OpenCV."""

import argparse
import json
import os
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURE = os.path.join(HERE, "..", "data", "clahe_fixtures.json")


def inputs():
    import random
    rng = random.Random(20260101)
    cases = {
        "constant16": (16, 16, [[97] * 16 for _ in range(16)]),
        "ramp16": (16, 16, [[(7 * x + 3 * y) % 256 for x in range(16)] for y in range(16)]),
        "noise32x24": (32, 24, [[rng.randrange(40, 120) for _ in range(32)] for _ in range(24)]),
        "bimodal24": (24, 24, [[30 if (x // 3 + y // 5) % 2 else 200 for x in range(24)] for y in range(24)]),
    }
    return cases


def build():
    import cv2
    import numpy as np
    clahe = cv2.createCLAHE(clipLimit=2.0, tileGridSize=(8, 8))
    out = {}
    for name, (w, h, rows) in inputs().items():
        arr = np.array(rows, dtype=np.uint8)
        res = clahe.apply(arr)
        out[name] = {"width": w, "height": h, "input": arr.flatten().tolist(),
                     "output": res.flatten().tolist()}
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--write", action="store_true")
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args()
    try:
        data = build()
    except ImportError:
        print("opencv unavailable; skipping")
        return 0
    if args.write:
        with open(FIXTURE, "w") as f:
            json.dump(data, f)
        print("wrote", FIXTURE)
        return 0
    with open(FIXTURE) as f:
        frozen = json.load(f)
    bad = [k for k in data if frozen.get(k) != data[k]]
    print("clahe fixtures checked, mismatches:", len(bad), *bad)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
