"""Bayer color-filter-array conversions and serialization.

A Bayer raster stores one 8-bit sample per pixel; the 2x2 cell pattern
names which channel each position carries (two greens, one red, one blue).
extract_cfa drops an RGB image back to the raw mosaic losslessly for the
retained channel; demosaic_bilinear rebuilds RGB by averaging same-channel
neighbors in the 3x3 patch (replicate borders, round half away from zero).
"""

import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np
from PIL import Image

from .backend import kernels
from .errors import ConfigError, DataError

_R, _G, _B = 0, 1, 2


class CfaPattern(Enum):
    """2x2 cell layout, named by the channels at (0,0),(0,1),(1,0),(1,1)."""

    BGGR = 0
    GRBG = 1
    GBRG = 2
    RGGB = 3

    @property
    def channel_map(self) -> np.ndarray:
        """(2, 2) array: channel index sampled at (y % 2, x % 2)."""
        return np.array(_CHANNEL_MAPS[self.name], dtype=np.int64)


_CHANNEL_MAPS = {
    "BGGR": [[_B, _G], [_G, _R]],
    "GRBG": [[_G, _R], [_B, _G]],
    "GBRG": [[_G, _B], [_R, _G]],
    "RGGB": [[_R, _G], [_G, _B]],
}

_MAGIC = b"BAYR"
_HEADER = struct.Struct("<4sHHB3x")  # magic, width, height, pattern, reserved


@dataclass(frozen=True)
class BayerImage:
    """Raw mosaic: (height, width) uint8 samples plus the cell pattern."""

    width: int
    height: int
    pattern: CfaPattern
    samples: np.ndarray

    def __post_init__(self):
        if self.width % 2 or self.height % 2 or self.width <= 0 or self.height <= 0:
            raise DataError(
                f"Bayer dimensions must be positive and even, got {self.width}x{self.height}")
        s = np.asarray(self.samples, dtype=np.uint8)
        if s.shape != (self.height, self.width):
            s = s.reshape(self.height, self.width)
        object.__setattr__(self, "samples", s)


@dataclass(frozen=True)
class RgbImage:
    """(height, width, 3) uint8 pixels, channel order R, G, B."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.uint8)
        if p.shape != (self.height, self.width, 3):
            p = p.reshape(self.height, self.width, 3)
        object.__setattr__(self, "pixels", p)


def extract_cfa(rgb: RgbImage, pattern: CfaPattern) -> BayerImage:
    """Keep, at each pixel, only the channel the CFA samples there."""
    if rgb.width % 2 or rgb.height % 2:
        raise DataError(
            f"CFA extraction needs even dimensions, got {rgb.width}x{rgb.height}")
    cmap = pattern.channel_map
    chan = cmap[np.arange(rgb.height)[:, None] & 1, np.arange(rgb.width)[None, :] & 1]
    samples = np.take_along_axis(rgb.pixels, chan[:, :, None], axis=2)[:, :, 0]
    return BayerImage(rgb.width, rgb.height, pattern, samples)


def demosaic_bilinear(bayer: BayerImage) -> RgbImage:
    """Rebuild RGB: sampled channel copied, missing ones 3x3-averaged."""
    out = kernels.demosaic3x3(bayer.samples.astype(np.int64),
                              bayer.pattern.channel_map)
    return RgbImage(bayer.width, bayer.height, out.astype(np.uint8))


def pack_bytes(bayer: BayerImage) -> bytes:
    """Row-major raw dump: width*height bytes, no header, no padding."""
    return bayer.samples.tobytes()


def unpack_bytes(data: bytes, width: int, height: int, pattern: CfaPattern) -> BayerImage:
    if len(data) != width * height:
        raise DataError(f"expected {width * height} bytes, got {len(data)}")
    samples = np.frombuffer(data, dtype=np.uint8).reshape(height, width)
    return BayerImage(width, height, pattern, samples.copy())


def write_bayer(bayer: BayerImage, path) -> None:
    """Write the .bayer container: 12-byte header then the packed payload."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, bayer.width, bayer.height, bayer.pattern.value))
        fh.write(pack_bytes(bayer))


def read_bayer(path) -> BayerImage:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise DataError(f"{path}: truncated header")
        magic, width, height, pat = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}")
        try:
            pattern = CfaPattern(pat)
        except ValueError:
            raise DataError(f"{path}: unknown pattern code {pat}") from None
        payload = fh.read()
    return unpack_bytes(payload, width, height, pattern)


def read_png(path) -> RgbImage:
    img = Image.open(path).convert("RGB")
    pixels = np.asarray(img, dtype=np.uint8)
    return RgbImage(img.width, img.height, pixels)


def write_png(rgb: RgbImage, path) -> None:
    Image.fromarray(rgb.pixels, mode="RGB").save(path, format="PNG")


def parse_pattern(name: str) -> CfaPattern:
    try:
        return CfaPattern[name.upper()]
    except KeyError:
        raise ConfigError(
            f"unknown CFA pattern {name!r}; choose from "
            f"{', '.join(p.name for p in CfaPattern)}") from None
