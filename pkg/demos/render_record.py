"""Render a synthetic 12-lead record to a 506x187 grayscale PNG.

    python demos/render_record.py [out.png]
"""

import sys

from ecgpipe.raster import rasterize, write_png
from ecgpipe.records import ArrhythmiaClass
from ecgpipe.synthetic import rhythm_record

out = sys.argv[1] if len(sys.argv) > 1 else "demo_af.png"
rec = rhythm_record(ArrhythmiaClass.AF, seed=3)
img = rasterize(rec)
write_png(img, out)
ink = (img.pixels < 255).mean()
print(f"{rec.record_id}: {img.width}x{img.height}, {ink:.1%} of pixels inked -> {out}")
