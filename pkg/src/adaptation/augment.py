import numpy as np

MIN_AREA_SCALE = 0.5
MAX_AREA_SCALE = 1.0
ASPECT_RATIO_RANGE = (3.0 / 4.0, 4.0 / 3.0)


def crop_cells(grid: int, rng: np.random.Generator) -> tuple[int, int, int, int]:
    """
    (top, left, rows, cols) of a contiguous sub-grid of a grid x grid patch grid covering [0.5, 1.0] of its
    cells, aspect ratio drawn within [3/4, 4/3] before rounding to whole cells
    """
    cells = rng.uniform(MIN_AREA_SCALE, MAX_AREA_SCALE) * grid * grid
    log_low, log_high = np.log(ASPECT_RATIO_RANGE)
    aspect = np.exp(rng.uniform(log_low, log_high))

    rows = int(np.clip(round(np.sqrt(cells / aspect)), 1, grid))
    cols = int(np.clip(round(np.sqrt(cells * aspect)), 1, grid))
    top = int(rng.integers(0, grid - rows + 1))
    left = int(rng.integers(0, grid - cols + 1))

    return top, left, rows, cols


def resized_crop(image: np.ndarray, rng: np.random.Generator, patch: int = 1) -> np.ndarray:
    """
    Random resized crop of a (C, S, S) image on its patch grid: a sub-grid of whole patches, resampled back
    to the full grid by nearest-index replication of patches
    """
    channels, size, _ = image.shape
    grid = size // patch
    top, left, rows, cols = crop_cells(grid, rng)

    cell_rows = top + (np.arange(grid) * rows) // grid
    cell_cols = left + (np.arange(grid) * cols) // grid

    tiles = image.reshape(channels, grid, patch, grid, patch)
    tiles = tiles[:, cell_rows][:, :, :, cell_cols]
    return tiles.reshape(channels, size, size)


def augment(x: np.ndarray, views: int, rng: np.random.Generator, patch: int = 1) -> np.ndarray:
    """B views of `x`: view 0 is `x` itself, the rest random resized crops on the patch grid. (B, C, S, S)"""
    x = np.asarray(x, dtype=np.float64)
    batch = np.empty((views, *x.shape))
    batch[0] = x
    for view in range(1, views):
        batch[view] = resized_crop(x, rng, patch)
    return batch
