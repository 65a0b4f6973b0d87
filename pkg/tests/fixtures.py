"""Fixed synthetic records shared by the raster, CLI and acceptance tests.

``python tests/fixtures.py`` rewrites the golden PNGs; do that only when the
renderer is meant to change.
"""

from pathlib import Path

import numpy as np

from ecgpipe.raster import rasterize, write_png
from ecgpipe.records import EcgRecord
from ecgpipe.synthetic import pulse_record

GOLDEN = Path(__file__).parent / "golden"


def zeros_record():
    return EcgRecord("zeros", 500.0, np.zeros((12, 5000)))


def pulses_record():
    scales = np.linspace(-1.2, 1.2, 12)
    return pulse_record(bpm=75.0, duration_s=10.0, lead_scales=scales, record_id="pulses")[0]


def sawtooth_record():
    # exact integer arithmetic, so the fixture itself is platform independent
    i = np.arange(3000)
    leads = np.stack([((i * (k + 1)) % (97 + 13 * k)) / 50.0 - 1.0 for k in range(12)])
    return EcgRecord("sawtooth", 500.0, leads)


FIXTURES = {"zeros": zeros_record, "pulses": pulses_record, "sawtooth": sawtooth_record}


def golden_path(name):
    return GOLDEN / f"{name}.png"


def regenerate():
    GOLDEN.mkdir(exist_ok=True)
    for name, make in FIXTURES.items():
        write_png(rasterize(make()), golden_path(name))
        print("wrote", golden_path(name))


if __name__ == "__main__":
    regenerate()
