"""Aspect-ratio-aware page tiling: one global view plus a grid of local crops.

Grid choice is pure integer geometry. The page is stretched to
``cols*tile_side x rows*tile_side`` and cut into square crops in row-major
order. Image I/O lives in :func:`tile_image` and needs Pillow.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "PageGeometry",
    "Rect",
    "TileLayout",
    "apply_rotation",
    "crop_coordinates",
    "plan_layout",
    "tile_image",
    "visual_token_estimate",
]


@dataclass(frozen=True)
class PageGeometry:
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"page must be at least 1x1, got {self.width}x{self.height}")


@dataclass(frozen=True)
class Rect:
    left: int
    top: int
    right: int
    bottom: int

    @property
    def area(self) -> int:
        return (self.right - self.left) * (self.bottom - self.top)

    def as_box(self) -> tuple[int, int, int, int]:
        return (self.left, self.top, self.right, self.bottom)


@dataclass(frozen=True)
class TileLayout:
    rows: int
    cols: int
    tile_side: int
    includes_global: bool = True

    @property
    def resized_width(self) -> int:
        return self.cols * self.tile_side

    @property
    def resized_height(self) -> int:
        return self.rows * self.tile_side

    @property
    def n_tiles(self) -> int:
        return self.rows * self.cols

    @property
    def crops(self) -> list[Rect]:
        return crop_coordinates(self)


def _closer(a: tuple[int, int], b: tuple[int, int], page: PageGeometry) -> int:
    """Compare log-aspect error of grids a and b (rows, cols) exactly.

    |ln(c/r) - ln(w/h)| = ln(max(x, 1/x)) with x = c*h / (r*w), so comparing
    errors reduces to comparing max(p, q)/min(p, q) with p = c*h, q = r*w,
    which cross-multiplies into integers. Returns -1, 0 or 1.
    """
    pa, qa = a[1] * page.height, a[0] * page.width
    pb, qb = b[1] * page.height, b[0] * page.width
    hi_a, lo_a = max(pa, qa), min(pa, qa)
    hi_b, lo_b = max(pb, qb), min(pb, qb)
    lhs, rhs = hi_a * lo_b, hi_b * lo_a
    return (lhs > rhs) - (lhs < rhs)


def plan_layout(
    page: PageGeometry, tile_side: int = 336, max_tiles: int = 9, include_global: bool = True
) -> TileLayout:
    """Pick the grid whose aspect ratio best matches the page.

    Minimizes |ln(cols/rows) - ln(width/height)| over rows*cols <= max_tiles;
    ties go to more tiles, then to fewer rows.
    """
    if tile_side < 1:
        raise ValueError("tile_side must be >= 1")
    if max_tiles < 1:
        raise ValueError("max_tiles must be >= 1")
    best = (1, 1)
    for rows in range(1, max_tiles + 1):
        for cols in range(1, max_tiles // rows + 1):
            cand = (rows, cols)
            c = _closer(cand, best, page)
            if c < 0:
                best = cand
            elif c == 0:
                if rows * cols > best[0] * best[1] or (
                    rows * cols == best[0] * best[1] and rows < best[0]
                ):
                    best = cand
    return TileLayout(rows=best[0], cols=best[1], tile_side=tile_side, includes_global=include_global)


def crop_coordinates(layout: TileLayout) -> list[Rect]:
    s = layout.tile_side
    return [
        Rect(c * s, r * s, (c + 1) * s, (r + 1) * s)
        for r in range(layout.rows)
        for c in range(layout.cols)
    ]


def visual_token_estimate(layout: TileLayout, tokens_per_tile: int) -> int:
    if tokens_per_tile < 1:
        raise ValueError("tokens_per_tile must be >= 1")
    return (layout.n_tiles + int(layout.includes_global)) * tokens_per_tile


def apply_rotation(page: PageGeometry, quarter_turns: int) -> PageGeometry:
    """Geometry after rotating by ``quarter_turns`` x 90 degrees."""
    if quarter_turns not in (0, 1, 2, 3):
        raise ValueError("quarter_turns must be 0, 1, 2 or 3")
    if quarter_turns % 2:
        return PageGeometry(page.height, page.width)
    return page


def tile_image(
    image_path: str | Path,
    out_dir: str | Path,
    tile_side: int = 336,
    max_tiles: int = 9,
    quarter_turns: int = 0,
) -> tuple[TileLayout, list[Path]]:
    """Write ``global.png`` and one ``<row>_<col>.png`` per crop."""
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with Image.open(image_path) as im:
        im = im.convert("RGB")
        if quarter_turns:
            # PIL rotates counter-clockwise; quarter turns here are clockwise
            im = im.rotate(-90 * quarter_turns, expand=True)
        layout = plan_layout(PageGeometry(*im.size), tile_side, max_tiles)
        canvas = im.resize((layout.resized_width, layout.resized_height), Image.BICUBIC)
        written = []
        if layout.includes_global:
            path = out_dir / "global.png"
            im.resize((tile_side, tile_side), Image.BICUBIC).save(path)
            written.append(path)
        for i, rect in enumerate(layout.crops):
            r, c = divmod(i, layout.cols)
            path = out_dir / f"{r}_{c}.png"
            canvas.crop(rect.as_box()).save(path)
            written.append(path)
    return layout, written
