"""Top-view BS-UE association images.

World coordinates map affinely onto the pixel square with north up.
Polygons are filled by an even-odd scanline sampled at pixel centers
(no anti-aliasing). Draw order: background, foliage, buildings, link
line, BS disc, UE triangle; later layers overwrite earlier ones.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import BUILDING, FOLIAGE, Point2D, ScenarioError, SiteMap


@dataclass(frozen=True)
class RasterConfig:
    resolution: int = 64
    # map layers in pale tints, overlays dark and saturated: the BS-UE
    # overlay is the only content that varies between a scene's images,
    # and it has to dominate the image variance for a low-dimensional
    # autoencoding code to pick it up
    background_rgb: tuple = (255, 255, 255)
    building_rgb: tuple = (255, 210, 210)
    foliage_rgb: tuple = (215, 245, 215)
    bs_rgb: tuple = (0, 0, 0)
    ue_rgb: tuple = (0, 0, 255)
    link_rgb: tuple = (70, 50, 200)
    bs_radius_px: int = 3
    ue_halfsize_px: int = 3
    line_thickness_px: int = 2

    def __post_init__(self):
        if self.resolution < 16:
            raise ValueError("resolution must be >= 16")
        colors = [self.background_rgb, self.building_rgb, self.foliage_rgb,
                  self.bs_rgb, self.ue_rgb, self.link_rgb]
        if len({tuple(c) for c in colors}) != len(colors):
            raise ValueError("raster colors must be pairwise distinct")


@dataclass(frozen=True)
class AssociationImage:
    pixels: np.ndarray          # res x res x 3 uint8
    bin_id: int | None
    bs: Point2D
    ue: Point2D


def _world_to_px(site: SiteMap, res: int, p: Point2D) -> tuple[float, float]:
    """Continuous pixel coordinates (px right, py down; north is up)."""
    b = site.bounds
    px = (p.x - b.min_x) / b.width * res
    py = (b.max_y - p.y) / b.height * res
    return px, py


def _fill_polygon(img: np.ndarray, pts: list[tuple[float, float]], rgb) -> None:
    """Even-odd scanline fill at pixel centers, vertices in pixel coords."""
    res = img.shape[0]
    ys = [p[1] for p in pts]
    row_lo = max(0, int(np.floor(min(ys) - 0.5)))
    row_hi = min(res - 1, int(np.ceil(max(ys))))
    n = len(pts)
    for row in range(row_lo, row_hi + 1):
        yc = row + 0.5
        xs = []
        for i in range(n):
            x1, y1 = pts[i]
            x2, y2 = pts[(i + 1) % n]
            if (y1 <= yc < y2) or (y2 <= yc < y1):
                xs.append(x1 + (yc - y1) / (y2 - y1) * (x2 - x1))
        xs.sort()
        for a, b in zip(xs[::2], xs[1::2]):
            c0 = max(0, int(np.ceil(a - 0.5)))
            c1 = min(res, int(np.ceil(b - 0.5)))
            if c1 > c0:
                img[row, c0:c1] = rgb


def _stamp(img: np.ndarray, col: int, row: int, half: int, rgb) -> None:
    res = img.shape[0]
    r0, r1 = max(0, row - half), min(res, row + half + 1)
    c0, c1 = max(0, col - half), min(res, col + half + 1)
    if r1 > r0 and c1 > c0:
        img[r0:r1, c0:c1] = rgb


def _draw_line(img: np.ndarray, p0, p1, thickness: int, rgb) -> None:
    """Bresenham between pixel centers, thickened by square stamps."""
    x0, y0 = int(p0[0]), int(p0[1])
    x1, y1 = int(p1[0]), int(p1[1])
    half = max(0, (thickness - 1) // 2)
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        _stamp(img, x0, y0, half, rgb)
        if x0 == x1 and y0 == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _draw_disc(img: np.ndarray, center, radius: int, rgb) -> None:
    res = img.shape[0]
    cx, cy = center
    r0 = max(0, int(cy - radius - 1))
    r1 = min(res, int(cy + radius + 2))
    c0 = max(0, int(cx - radius - 1))
    c1 = min(res, int(cx + radius + 2))
    for row in range(r0, r1):
        for col in range(c0, c1):
            if (col + 0.5 - cx) ** 2 + (row + 0.5 - cy) ** 2 <= radius ** 2:
                img[row, col] = rgb


class ScenePainter:
    """Pre-renders the static map layer; stamps per-UE overlays on copies."""

    def __init__(self, site: SiteMap, cfg: RasterConfig):
        self.site = site
        self.cfg = cfg
        res = cfg.resolution
        base = np.empty((res, res, 3), dtype=np.uint8)
        base[:] = cfg.background_rgb
        for kind, rgb in ((FOLIAGE, cfg.foliage_rgb), (BUILDING, cfg.building_rgb)):
            for poly in site.polygons:
                if poly.kind == kind:
                    pts = [_world_to_px(site, res, v) for v in poly.vertices]
                    _fill_polygon(base, pts, rgb)
        self.base = base
        self.bs_px = _world_to_px(site, res, site.bs.position)

    def paint(self, ue: Point2D, bin_id: int | None = None) -> AssociationImage:
        if not self.site.bounds.contains(ue):
            raise ScenarioError(f"UE position ({ue.x}, {ue.y}) outside bounds")
        cfg = self.cfg
        img = self.base.copy()
        ue_px = _world_to_px(self.site, cfg.resolution, ue)
        _draw_line(img, self.bs_px, ue_px, cfg.line_thickness_px, cfg.link_rgb)
        _draw_disc(img, self.bs_px, cfg.bs_radius_px, cfg.bs_rgb)
        h = cfg.ue_halfsize_px
        tri = [(ue_px[0], ue_px[1] - h),
               (ue_px[0] - h, ue_px[1] + h),
               (ue_px[0] + h, ue_px[1] + h)]
        _fill_polygon(img, tri, cfg.ue_rgb)
        # guarantee the marker survives rounding at small sizes
        ccol, crow = int(ue_px[0]), int((tri[0][1] + tri[1][1] + tri[2][1]) / 3)
        if 0 <= crow < cfg.resolution and 0 <= ccol < cfg.resolution:
            img[crow, ccol] = cfg.ue_rgb
        return AssociationImage(pixels=img, bin_id=bin_id,
                                bs=self.site.bs.position, ue=ue)


def rasterize_scene(site: SiteMap, ue: Point2D, cfg: RasterConfig) -> AssociationImage:
    return ScenePainter(site, cfg).paint(ue)


def image_to_tensor(img: AssociationImage | np.ndarray) -> np.ndarray:
    """uint8 HxWx3 -> float 3xHxW in [-1, 1] (v / 127.5 - 1)."""
    pixels = img.pixels if isinstance(img, AssociationImage) else img
    return (pixels.astype(np.float64) / 127.5 - 1.0).transpose(2, 0, 1)


def tensor_to_image(t: np.ndarray) -> np.ndarray:
    """Inverse of image_to_tensor on representable values."""
    arr = np.clip(np.rint((np.asarray(t) + 1.0) * 127.5), 0, 255)
    return arr.astype(np.uint8).transpose(1, 2, 0)


def save_tensor(t: np.ndarray, path) -> None:
    """Raw dump: ASCII header line 'C H W' then little-endian float32 data."""
    t = np.asarray(t, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(f"{t.shape[0]} {t.shape[1]} {t.shape[2]}\n".encode("ascii"))
        fh.write(t.tobytes())


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        shape = tuple(int(v) for v in fh.readline().split())
        return np.frombuffer(fh.read(), dtype="<f4").reshape(shape).astype(np.float64)


def render_dataset(site: SiteMap, bins, cfg: RasterConfig, out_dir) -> dict[int, str]:
    """One PNG + raw tensor per bin (UE at bin center), plus an index CSV.

    Returns the bin_id -> png path mapping. Output is byte-deterministic
    for fixed (site, cfg).
    """
    bins = list(bins)
    if not bins:
        raise ValueError("render_dataset needs at least one bin")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    painter = ScenePainter(site, cfg)
    index: dict[int, str] = {}
    for b in bins:
        img = painter.paint(b.center, bin_id=b.id)
        png_path = out_dir / f"bin_{b.id:06d}.png"
        Image.fromarray(img.pixels).save(png_path, format="PNG")
        save_tensor(image_to_tensor(img), png_path.with_suffix(".f32"))
        index[b.id] = str(png_path)
    with (out_dir / "index.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_id", "path"])
        for bin_id in sorted(index):
            writer.writerow([bin_id, Path(index[bin_id]).name])
    return index


def load_image(path) -> np.ndarray:
    """Load a rendered PNG back as uint8 HxWx3."""
    return np.asarray(Image.open(path).convert("RGB"))
