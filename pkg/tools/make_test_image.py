"""Regenerate the bundled grayscale test pattern.

The pattern is smooth, non-separable (rotated anisotropic blobs plus a wavy
ridge), and keeps every gray level <= 254 so the dark-is-dense reading of the
image is a strictly positive density. Writes binary PGM (P5, maxval 255).

Usage: python3 tools/make_test_image.py [OUT.pgm]
"""

import sys

import numpy as np

SIZE = 256


def intensity(x, y):
    """Brightness-inverted density in [0, 1]; larger means darker ink."""
    # rotated anisotropic blob, upper left
    c, s = np.cos(0.6), np.sin(0.6)
    u = c * (x - 0.33) + s * (y - 0.62)
    v = -s * (x - 0.33) + c * (y - 0.62)
    blob1 = np.exp(-(u * u / (2 * 0.15**2) + v * v / (2 * 0.055**2)))
    # round blob, lower right
    blob2 = 0.85 * np.exp(-((x - 0.72) ** 2 + (y - 0.28) ** 2) / (2 * 0.09**2))
    # wavy ridge across the frame; sine phase couples the axes
    ridge = 0.6 * np.exp(-((y - 0.5 - 0.22 * np.sin(2 * np.pi * x)) ** 2) / (2 * 0.045**2))
    # gentle diagonal wash so no region is exactly flat
    wash = 0.08 * (x + y) / 2.0
    out = blob1 + blob2 + ridge + wash
    return out / out.max()


def make_image(size=SIZE):
    t = (np.arange(size) + 0.5) / size
    x, y = np.meshgrid(t, t[::-1], indexing="xy")  # row 0 is the top of the image
    ink = intensity(x, y)
    gray = np.rint(254.0 * (1.0 - ink)).astype(np.uint8)
    assert gray.max() <= 254
    return gray


def write_pgm(path, gray):
    h, w = gray.shape
    header = "P5\n# smooth non-separable test pattern\n%d %d\n255\n" % (w, h)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(gray.tobytes())


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "src/otquant/data/testpattern.pgm"
    write_pgm(out, make_image())
    print("wrote", out)
