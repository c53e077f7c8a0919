"""Sliding-window placement for full-image encoding.

Kept as an independent implementation of the consumer's published window
contract (384-px windows at 128-px steps, final window clamped into the
image, whole image as one window when a side fits); the test suite checks
both components agree on the same dimensions.
"""

WINDOW_SIZE = 384
WINDOW_STRIDE = 128


def axis_starts(extent: int) -> list[int]:
    if extent <= 0:
        raise ValueError("extent must be positive")
    if extent <= WINDOW_SIZE:
        return [0]
    starts = list(range(0, extent - WINDOW_SIZE, WINDOW_STRIDE))
    last = extent - WINDOW_SIZE
    if starts[-1] != last:
        starts.append(last)
    return starts


def plan(width: int, height: int) -> list[tuple[int, int, int, int]]:
    """(x, y, w, h) placements covering the image."""
    ww = min(WINDOW_SIZE, width)
    wh = min(WINDOW_SIZE, height)
    return [(x, y, ww, wh) for y in axis_starts(height) for x in axis_starts(width)]
