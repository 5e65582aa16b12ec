"""Regenerate the frozen transform fixture with the scalar-loop reference.

    python tests/data/make_golden.py
"""

import pathlib
import sys

import numpy as np

HERE = pathlib.Path(__file__).parent
sys.path.insert(0, str(HERE.parent))

from oracles import hdrmax_loop  # noqa: E402

from hdrmax.transform import noise_field  # noqa: E402

PATCH, DELTA, SIGMA, SEED, FRAME_INDEX = 5, 4.0, 0.001, 42, 0


def main():
    frame = np.random.default_rng(7).integers(0, 1024, size=(16, 16))
    frame[3:5, 3:5] = 600  # part of a tile left untouched by the ramp below
    frame[10:15, 10:15] = 777  # one fully constant tile
    noise = noise_field((16, 16), SIGMA, SEED, FRAME_INDEX)
    golden = hdrmax_loop(frame.tolist(), PATCH, DELTA, noise.tolist())
    np.savez(HERE / "hdrmax_golden_16x16.npz", frame=frame, golden=golden,
             params=np.array([PATCH, DELTA, SIGMA, SEED, FRAME_INDEX]))


if __name__ == "__main__":
    main()
