"""Drawing-exam image processing: trace extraction and template generation.

An exam photograph contains a printed guide figure (the exam trace, ET)
and the patient's pen stroke over it (the handwriting trace, HT).  Both
are recovered as binary masks with the convention 0 = ink, 1 = background:
the ET by blurring, thresholding dark pixels and dilating; the HT by a
looser threshold followed by removal of everything the ET explains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image
from scipy import ndimage

ET_CUTOFF = 90
HT_CUTOFF = 200
BLUR_KERNEL = 5
DILATE_KERNEL = 4

# Blend rendering colors; chosen distinct so masks unmix by exact match.
ET_BLEND_COLOR = (0, 0, 0)
HT_BLEND_COLOR = (186, 26, 26)
BLEND_BACKGROUND = (255, 255, 255)


class EmptyTraceError(ValueError):
    """A mask that was required to contain ink is empty."""


@dataclass(frozen=True)
class RasterImage:
    """An 8-bit RGB pixel grid, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) array, got shape {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must have positive dimensions")
        if p.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {p.dtype}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def filled(cls, width: int, height: int, color=(255, 255, 255)) -> "RasterImage":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:] = color
        return cls(px)


@dataclass(frozen=True)
class BinaryMask:
    """A {0, 1} grid with 0 = ink (trace) and 1 = background."""

    bits: np.ndarray

    def __post_init__(self):
        b = self.bits
        if b.ndim != 2:
            raise ValueError(f"expected 2-d bits, got shape {b.shape}")
        if b.shape[0] < 1 or b.shape[1] < 1:
            raise ValueError("mask must have positive dimensions")
        if b.dtype != np.uint8:
            raise ValueError(f"expected uint8 bits, got {b.dtype}")
        if not np.isin(b, (0, 1)).all():
            raise ValueError("mask bits must be 0 or 1")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def ink_count(self) -> int:
        return int((self.bits == 0).sum())

    def ink_coordinates(self) -> np.ndarray:
        """(n, 2) array of (row, col) positions of ink pixels."""
        return np.argwhere(self.bits == 0)


@dataclass(frozen=True)
class TracePair:
    """The two masks extracted from one exam image."""

    exam_trace: BinaryMask
    handwriting_trace: BinaryMask
    source_id: str = ""

    def __post_init__(self):
        et, ht = self.exam_trace, self.handwriting_trace
        if et.bits.shape != ht.bits.shape:
            raise ValueError(
                f"trace dimensions differ: ET {et.bits.shape} vs HT {ht.bits.shape}"
            )

    def overlap_fraction(self) -> float:
        """Fraction of HT ink pixels that are also ET ink.

        Dilation legitimately creates some overlap; synthetic fixtures
        assert this stays under 0.2.
        """
        ht_ink = self.handwriting_trace.bits == 0
        n = int(ht_ink.sum())
        if n == 0:
            return 0.0
        both = ht_ink & (self.exam_trace.bits == 0)
        return int(both.sum()) / n


def _require_odd_kernel(kernel: int) -> None:
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError(f"kernel must be odd and >= 1, got {kernel}")


def mean_blur(img: RasterImage, kernel: int) -> RasterImage:
    """Arithmetic-mean filter with edge-replicated borders.

    Computed with an integer summed-area table so results are exact;
    the mean is rounded half-up to the nearest channel value.
    """
    _require_odd_kernel(kernel)
    if kernel == 1:
        return RasterImage(img.pixels.copy())
    r = kernel // 2
    padded = np.pad(img.pixels.astype(np.int64), ((r, r), (r, r), (0, 0)), mode="edge")
    ii = np.zeros(
        (padded.shape[0] + 1, padded.shape[1] + 1, 3), dtype=np.int64
    )
    ii[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    k = kernel
    sums = ii[k:, k:] - ii[:-k, k:] - ii[k:, :-k] + ii[:-k, :-k]
    area = k * k
    out = (2 * sums + area) // (2 * area)
    return RasterImage(out.astype(np.uint8))


def median_blur(img: RasterImage, kernel: int) -> RasterImage:
    """Per-channel median filter with edge-replicated borders."""
    _require_odd_kernel(kernel)
    if kernel == 1:
        return RasterImage(img.pixels.copy())
    out = np.empty_like(img.pixels)
    for c in range(3):
        out[:, :, c] = ndimage.median_filter(
            img.pixels[:, :, c], size=kernel, mode="nearest"
        )
    return RasterImage(out)


def binary_threshold(img: RasterImage, cutoff: int) -> BinaryMask:
    """0 (ink) where all three channels fall below ``cutoff``, else 1."""
    if not 0 < cutoff <= 255:
        raise ValueError(f"cutoff must be in (0, 255], got {cutoff}")
    dark = (img.pixels < cutoff).all(axis=2)
    return BinaryMask(np.where(dark, 0, 1).astype(np.uint8))


def dilate(mask: BinaryMask, kernel: int) -> BinaryMask:
    """Grow the ink region by a square window.

    The output bit is 0 iff any bit in the kernel window is 0.  Odd
    kernels center the window on the output pixel; even kernels anchor
    the output pixel at the window's top-left corner, so ink spreads
    toward smaller row/column indices.
    """
    if kernel < 1:
        raise ValueError(f"kernel must be >= 1, got {kernel}")
    if kernel == 1:
        return BinaryMask(mask.bits.copy())
    lead = (kernel - 1) // 2 if kernel % 2 == 1 else 0
    trail = kernel - 1 - lead
    padded = np.pad(
        mask.bits, ((lead, trail), (lead, trail)), constant_values=1
    )
    windows = sliding_window_view(padded, (kernel, kernel))
    return BinaryMask(windows.min(axis=(2, 3)).astype(np.uint8))


def extract_exam_trace(img: RasterImage) -> BinaryMask:
    """Recover the printed guide: mean blur, dark threshold, dilate."""
    blurred = mean_blur(img, BLUR_KERNEL)
    mask = binary_threshold(blurred, ET_CUTOFF)
    return dilate(mask, DILATE_KERNEL)


def _difference_image(mask: BinaryMask, exam_trace: BinaryMask) -> BinaryMask:
    """Mark (as 1) ink pixels the exam trace does not explain."""
    pen_only = (mask.bits == 0) & (exam_trace.bits == 1)
    return BinaryMask(pen_only.astype(np.uint8))


def _invert(mask: BinaryMask) -> BinaryMask:
    """Bit complement; restores the 0 = ink convention after differencing."""
    return BinaryMask((1 - mask.bits).astype(np.uint8))


def extract_handwriting_trace(img: RasterImage, exam_trace: BinaryMask) -> BinaryMask:
    """Recover the pen stroke: median blur, loose threshold, remove the
    exam trace, invert back to ink convention, dilate."""
    if exam_trace.bits.shape != (img.height, img.width):
        raise ValueError(
            f"exam trace shape {exam_trace.bits.shape} does not match image "
            f"({img.height}, {img.width})"
        )
    blurred = median_blur(img, BLUR_KERNEL)
    rough = binary_threshold(blurred, HT_CUTOFF)
    diff = _difference_image(rough, exam_trace)
    return dilate(_invert(diff), DILATE_KERNEL)


def extract_trace_pair(img: RasterImage, source_id: str = "") -> TracePair:
    """Run both extractions on one exam image."""
    et = extract_exam_trace(img)
    ht = extract_handwriting_trace(img, et)
    return TracePair(exam_trace=et, handwriting_trace=ht, source_id=source_id)


def blend_traces(pair: TracePair) -> RasterImage:
    """Composite both traces into one image, HT ink over ET ink over white.

    Colors are reserved constants, so the masks round-trip losslessly
    through :func:`unblend_traces`.
    """
    h, w = pair.exam_trace.bits.shape
    px = np.empty((h, w, 3), dtype=np.uint8)
    px[:] = BLEND_BACKGROUND
    px[pair.exam_trace.bits == 0] = ET_BLEND_COLOR
    px[pair.handwriting_trace.bits == 0] = HT_BLEND_COLOR
    return RasterImage(px)


def unblend_traces(img: RasterImage, source_id: str = "") -> TracePair:
    """Recover the exact masks from a blend by color match."""
    et = np.where((img.pixels == ET_BLEND_COLOR).all(axis=2), 0, 1)
    ht = np.where((img.pixels == HT_BLEND_COLOR).all(axis=2), 0, 1)
    return TracePair(
        exam_trace=BinaryMask(et.astype(np.uint8)),
        handwriting_trace=BinaryMask(ht.astype(np.uint8)),
        source_id=source_id,
    )


# ---------------------------------------------------------------------------
# Printable assessment template
# ---------------------------------------------------------------------------

# The guide stroke is pure black and the page a light gray rather than
# white: a white surround lifts the 5x5 blur mean of stroke-edge pixels
# above the ET cutoff and erodes the guides, while >= 200 gray stays
# background under the HT threshold and keeps edge means below 90.
TEMPLATE_STROKE_COLOR = (0, 0, 0)
TEMPLATE_BACKGROUND = (212, 212, 212)


@dataclass(frozen=True)
class TemplateSpec:
    """Layout parameters for the printable assessment page."""

    page_width: int = 1600
    page_height: int = 1000
    spiral_count: int = 4
    meander_count: int = 4
    figure_radius: float = 150.0
    spiral_turns: float = 2.0
    spiral_inner_radius: float = 12.0
    meander_gap: float = 36.0
    # Wide enough that the blur-eroded, one-sidedly re-dilated guide still
    # covers over 99% of the drawn stroke pixels.
    stroke_width: int = 8

    def __post_init__(self):
        if self.page_width < 1 or self.page_height < 1:
            raise ValueError("page dimensions must be positive")
        if self.spiral_count < 0 or self.meander_count < 0:
            raise ValueError("figure counts must be non-negative")


def spiral_path_points(cx: float, cy: float, a: float, b: float, turns: float):
    """Dense (x, y) samples of r = a + b*theta, about one per pixel."""
    theta_max = 2.0 * np.pi * turns
    r_max = a + b * theta_max
    # Arc length of an Archimedean spiral is bounded by r_max * theta_max.
    n = max(64, int(theta_max * r_max * 1.5))
    theta = np.linspace(0.0, theta_max, n)
    r = a + b * theta
    return cx + r * np.cos(theta), cy + r * np.sin(theta)


def meander_path_points(cx: float, cy: float, radius: float, gap: float):
    """Inward square-spiral polyline, one sample per pixel of path."""
    xs, ys = [], []
    x0, y0 = cx + radius, cy + radius
    extent = 2.0 * radius
    heading = 0  # 0 left, 1 up, 2 right, 3 down
    x, y = x0, y0
    legs = 0
    while extent > gap:
        dx, dy = [(-1, 0), (0, -1), (1, 0), (0, 1)][heading]
        steps = int(extent)
        t = np.arange(steps + 1, dtype=float)
        xs.append(x + dx * t)
        ys.append(y + dy * t)
        x += dx * steps
        y += dy * steps
        heading = (heading + 1) % 4
        legs += 1
        # After the first two legs every subsequent leg shortens by the
        # gap, which walks the path inward at a constant pitch.
        if legs >= 2:
            extent -= gap if legs % 2 == 0 else 0.0
    return np.concatenate(xs), np.concatenate(ys)


def stamp_path(canvas: np.ndarray, xs: np.ndarray, ys: np.ndarray, width: int, color) -> None:
    h, w = canvas.shape[:2]
    r = max(1, width) / 2.0
    span = int(np.ceil(r))
    oy, ox = np.mgrid[-span : span + 1, -span : span + 1]
    disk = (oy**2 + ox**2) <= r * r
    offs = np.argwhere(disk) - span
    cx = np.rint(xs).astype(int)
    cy = np.rint(ys).astype(int)
    pts = np.unique(np.stack([cy, cx], axis=1), axis=0)
    px = (pts[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    keep = (px[:, 0] >= 0) & (px[:, 0] < h) & (px[:, 1] >= 0) & (px[:, 1] < w)
    px = px[keep]
    canvas[px[:, 0], px[:, 1]] = color


def generate_assessment_template(spec: TemplateSpec = TemplateSpec()) -> RasterImage:
    """Render the printable page: one row of spiral guides to trace over,
    one row of rectangular meander guides.

    The stroke color sits below the ET cutoff so a printed-and-scanned
    page (or the rendering itself) is recoverable by extract_exam_trace.
    """
    img = RasterImage.filled(spec.page_width, spec.page_height, TEMPLATE_BACKGROUND)
    canvas = img.pixels
    rows = []
    if spec.spiral_count > 0:
        rows.append(("spiral", spec.spiral_count))
    if spec.meander_count > 0:
        rows.append(("meander", spec.meander_count))
    if not rows:
        return img
    row_h = spec.page_height / len(rows)
    half = spec.figure_radius + spec.stroke_width
    for row_idx, (kind, count) in enumerate(rows):
        cell_w = spec.page_width / count
        if 2 * half > min(cell_w, row_h):
            raise ValueError(
                f"{kind} guides of radius {spec.figure_radius} overlap in "
                f"{cell_w:.0f} x {row_h:.0f} cells"
            )
        cy = row_h * (row_idx + 0.5)
        for i in range(count):
            cx = cell_w * (i + 0.5)
            if kind == "spiral":
                theta_max = 2.0 * np.pi * spec.spiral_turns
                b = (spec.figure_radius - spec.spiral_inner_radius) / theta_max
                xs, ys = spiral_path_points(
                    cx, cy, spec.spiral_inner_radius, b, spec.spiral_turns
                )
            else:
                xs, ys = meander_path_points(cx, cy, spec.figure_radius, spec.meander_gap)
            stamp_path(canvas, xs, ys, spec.stroke_width, TEMPLATE_STROKE_COLOR)
    return img


def template_guide_mask(template: RasterImage) -> BinaryMask:
    """Mask of the guide stroke pixels of a rendered template page."""
    stroke = (template.pixels == TEMPLATE_STROKE_COLOR).all(axis=2)
    return BinaryMask(np.where(stroke, 0, 1).astype(np.uint8))


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------


def load_image(path: str | Path) -> RasterImage:
    """Decode a PNG/JPEG file to 8-bit RGB, compositing alpha over white."""
    with Image.open(path) as im:
        return _from_pil(im)


def decode_image(data: bytes) -> RasterImage:
    """Decode in-memory PNG/JPEG bytes (service uploads)."""
    import io

    with Image.open(io.BytesIO(data)) as im:
        return _from_pil(im)


def _from_pil(im: Image.Image) -> RasterImage:
    if im.mode in ("RGBA", "LA", "PA") or (im.mode == "P" and "transparency" in im.info):
        rgba = im.convert("RGBA")
        bg = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
        im = Image.alpha_composite(bg, rgba).convert("RGB")
    else:
        im = im.convert("RGB")
    return RasterImage(np.asarray(im, dtype=np.uint8).copy())


def save_image(img: RasterImage, path: str | Path) -> None:
    Image.fromarray(img.pixels, mode="RGB").save(path, format="PNG")


def encode_png(img: RasterImage) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(img.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_mask(mask: BinaryMask, path: str | Path) -> None:
    """Write a mask as a black-ink-on-white PNG."""
    gray = (mask.bits * 255).astype(np.uint8)
    Image.fromarray(gray, mode="L").save(path, format="PNG")


def load_mask(path: str | Path) -> BinaryMask:
    with Image.open(path) as im:
        gray = np.asarray(im.convert("L"))
    return BinaryMask(np.where(gray < 128, 0, 1).astype(np.uint8))
