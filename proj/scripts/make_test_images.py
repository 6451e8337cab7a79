"""Writes the 256x256 8-bit PGM test images in tests/data from scikit-image's bundled samples."""
import pathlib
import sys

import numpy as np
from skimage import color, data


def area_half(img):
    img = img.astype(np.float64)
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    img = img[:h, :w]
    return (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2]) / 4.0


def crop(img, size=256):
    top = (img.shape[0] - size) // 2
    left = (img.shape[1] - size) // 2
    return img[top:top + size, left:left + size]


def write_pgm(path, img):
    px = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (px.shape[1], px.shape[0]))
        f.write(px.tobytes())


def main(out_dir):
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    images = {
        "cameraman": area_half(data.camera()),
        "astronaut": area_half(color.rgb2gray(data.astronaut()) * 255.0),
        "moon": area_half(data.moon()),
        "brick": area_half(data.brick()),
        "coins": crop(data.coins()),
    }
    for name, img in images.items():
        assert img.shape == (256, 256), (name, img.shape)
        write_pgm(out / f"{name}.pgm", img)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data")
