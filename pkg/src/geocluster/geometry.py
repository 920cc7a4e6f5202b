"""Cluster regions and point configurations.

Regions are either discs of radius ``R`` centred at the origin or rectangles
``[0, width] x [0, height]``. Point generators are pure functions of their
arguments and seed.
"""

import csv
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from ._validation import (
    InhibitionInfeasibleError,
    ValidationError,
    as_generator,
    check_count,
    check_nonnegative,
    check_positive,
)

__all__ = [
    "Region",
    "PointSet",
    "gen_uniform",
    "gen_regular",
    "sample_inhibited",
    "simple_random_subsample",
    "pairwise_distances",
]

_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class Region:
    """A disc of radius ``radius`` or a ``width`` by ``height`` rectangle."""

    shape: str
    radius: float = None
    width: float = 1.0
    height: float = None

    def __post_init__(self):
        if self.shape == "disc":
            check_positive(self.radius, "radius")
        elif self.shape == "rect":
            check_positive(self.width, "width")
            check_positive(self.height, "height")
            if self.height > self.width:
                raise ValidationError("rectangle height must not exceed its width")
        else:
            raise ValidationError(f"shape must be 'disc' or 'rect', got {self.shape!r}")

    @classmethod
    def disc(cls, radius=1.0):
        return cls("disc", radius=radius)

    @classmethod
    def rect(cls, height, width=1.0):
        return cls("rect", width=width, height=height)

    @property
    def area(self):
        if self.shape == "disc":
            return math.pi * self.radius**2
        return self.width * self.height

    @property
    def scale(self):
        """Linear size used in approximation ratios: R for discs, sqrt(A) otherwise."""
        if self.shape == "disc":
            return self.radius
        return math.sqrt(self.area)

    def contains(self, coords):
        coords = np.asarray(coords, dtype=float).reshape(-1, 2)
        x, y = coords[:, 0], coords[:, 1]
        if self.shape == "disc":
            return x * x + y * y <= self.radius**2
        return (x >= 0) & (x <= self.width) & (y >= 0) & (y <= self.height)

    def _clamp(self, coords):
        # pull points that rounding left a hair outside back onto the region
        if self.shape == "disc":
            rr = np.hypot(coords[:, 0], coords[:, 1])
            out = ~self.contains(coords)
            while np.any(out):
                coords[out] *= (self.radius / rr[out]) * (1.0 - 1e-15)
                rr = np.hypot(coords[:, 0], coords[:, 1])
                out = ~self.contains(coords)
        else:
            np.clip(coords[:, 0], 0.0, self.width, out=coords[:, 0])
            np.clip(coords[:, 1], 0.0, self.height, out=coords[:, 1])
        return coords


@dataclass
class PointSet:
    """Sampled locations together with how they were produced."""

    coords: np.ndarray
    scheme: str = "given"
    seed: object = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float).reshape(-1, 2)

    def __len__(self):
        return self.coords.shape[0]

    def distances(self):
        return pairwise_distances(self.coords)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "y"])
            for x, y in self.coords:
                writer.writerow([repr(float(x)), repr(float(y))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.DictReader(row for row in fh if not row.startswith("#"))
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames[:2]] != ["x", "y"]:
                raise ValidationError(f"{path}: expected a header 'x,y'")
            coords = [(float(row["x"]), float(row["y"])) for row in reader]
        if not coords:
            raise ValidationError(f"{path}: no points")
        return cls(np.array(coords), scheme="given")


def pairwise_distances(points):
    """Euclidean distance matrix of a PointSet or an ``(n, 2)`` array."""
    coords = points.coords if isinstance(points, PointSet) else np.asarray(points, dtype=float)
    coords = coords.reshape(-1, 2)
    diff = coords[:, None, :] - coords[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def gen_uniform(region, n, seed=None):
    """``n`` independent uniform points in ``region``."""
    n = check_count(n, "n")
    rng = as_generator(seed)
    if region.shape == "disc":
        u = rng.random(n)
        theta = 2.0 * math.pi * rng.random(n)
        rad = region.radius * np.sqrt(u)
        coords = np.column_stack([rad * np.cos(theta), rad * np.sin(theta)])
    else:
        coords = rng.random((n, 2)) * [region.width, region.height]
    return PointSet(region._clamp(coords), scheme="uniform", seed=seed)


def _sunflower(n, radius, phase):
    k = np.arange(n)
    rad = radius * np.sqrt((k + 0.5) / n)
    theta = k * _GOLDEN_ANGLE + phase
    return np.column_stack([rad * np.cos(theta), rad * np.sin(theta)])


def _grid_layout(n, rows, width, height):
    """``n`` sites of a staggered lattice with ``rows`` rows.

    Every row shares the pitch ``width / cols``; odd rows are offset by half a
    pitch. Surplus lattice sites (fewer than ``rows``) are dropped from rows
    spread evenly through the stack, alternating between row ends.
    """
    cols = -(-n // rows)
    pitch = width / cols
    surplus = rows * cols - n
    drop_rows = set()
    if surplus:
        drop_rows = set(np.floor((np.arange(surplus) + 0.5) * rows / surplus).astype(int).tolist())
    blocks = []
    for i in range(rows):
        if rows == 1 or cols == 1:
            shift = 0.5
        else:
            shift = 0.25 if i % 2 == 0 else 0.75
        xs = (np.arange(cols) + shift) * pitch
        if i in drop_rows:
            xs = xs[1:] if len(blocks) % 2 == 0 else xs[:-1]
        blocks.append(np.column_stack([xs, np.full(len(xs), (i + 0.5) * height / rows)]))
    return np.vstack(blocks)


def _min_spacing(coords):
    if len(coords) < 2:
        return np.inf
    d = pairwise_distances(coords)
    np.fill_diagonal(d, np.inf)
    return d.min()


def _grid(n, width, height):
    """Staggered near-square grid; the row count near the aspect-ratio guess
    that gives the widest minimum spacing wins."""
    guess = max(1, round(math.sqrt(n * height / width)))
    best = None
    for rows in range(max(1, guess - 2), min(n, guess + 2) + 1):
        coords = _grid_layout(n, rows, width, height)
        spacing = _min_spacing(coords)
        if best is None or spacing > best[0]:
            best = (spacing, coords)
    return best[1]


def gen_regular(region, n, seed=None):
    """``n`` evenly spread points in ``region``.

    Discs use a sunflower (golden-angle) spiral with a seeded rotation.
    Rectangles use a near-square staggered grid whose row count follows the
    aspect ratio; surplus lattice sites are dropped evenly across rows and
    the seed picks a reflection.
    """
    n = check_count(n, "n")
    rng = as_generator(seed)
    if region.shape == "disc":
        coords = _sunflower(n, region.radius, 2.0 * math.pi * rng.random())
    else:
        w, h = region.width, region.height
        coords = _grid(n, w, h)
        flip_x, flip_y = rng.random(2) < 0.5
        if flip_x:
            coords[:, 0] = w - coords[:, 0]
        if flip_y:
            coords[:, 1] = h - coords[:, 1]
    return PointSet(region._clamp(coords), scheme="regular", seed=seed)


@numba.njit(cache=True, nogil=True)
def _greedy(dist, perm, n, delta, out):
    """Sequentially accept frame points at least ``delta`` from all accepted ones."""
    m = perm.shape[0]
    count = 0
    for t in range(m):
        if count + (m - t) < n:
            break
        c = perm[t]
        ok = True
        for j in range(count):
            if dist[c, out[j]] < delta:
                ok = False
                break
        if ok:
            out[count] = c
            count += 1
            if count == n:
                break
    return count


@numba.njit(cache=True, nogil=True)
def _try_delta(dist, perms, n, delta, out):
    for k in range(perms.shape[0]):
        if _greedy(dist, perms[k], n, delta, out) == n:
            return k
    return -1


@numba.njit(cache=True, nogil=True)
def _auto_delta(dist, perms, n, candidates, out):
    """Binary search over candidate spacings for the largest one that succeeds."""
    lo = -1
    hi = candidates.shape[0]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _try_delta(dist, perms, n, candidates[mid], out) >= 0:
            lo = mid
        else:
            hi = mid
    delta = 0.0 if lo < 0 else candidates[lo]
    _try_delta(dist, perms, n, delta, out)
    return delta


def _as_coords(frame):
    return frame.coords if isinstance(frame, PointSet) else np.asarray(frame, dtype=float).reshape(-1, 2)


def sample_inhibited(frame, n, delta="auto", k=0, eta=None, seed=None, restarts=50, dist=None):
    """Draw an inhibited subsample of ``n`` points from a frame.

    ``n - k`` points are drawn by random sequential selection so that no two
    are closer than ``delta``; up to ``restarts`` random orders are tried.
    With ``delta="auto"`` the largest spacing (among the frame's pairwise
    distances) for which a sample is found is located by bisection. The
    remaining ``k`` points are close-pair companions, each within ``eta`` of a
    distinct randomly chosen inhibited point; ``params["pairs"]`` lists the
    ``(primary, companion)`` frame indices.

    Raises
    ------
    ValidationError
        Bad arguments.
    InhibitionInfeasibleError
        No inhibited subset with the requested spacing was found, or a close
        pair has no frame point within ``eta``.
    """
    coords = _as_coords(frame)
    m = coords.shape[0]
    n = check_count(n, "n")
    k = check_count(k, "k", minimum=0)
    restarts = check_count(restarts, "restarts")
    if n > m:
        raise ValidationError(f"n={n} exceeds frame size {m}")
    if k and k > n - k:
        raise ValidationError("k close pairs need at least k inhibited points (2k <= n)")
    if k:
        eta = check_positive(eta, "eta")
    auto = isinstance(delta, str)
    if auto and delta != "auto":
        raise ValidationError(f"delta must be a distance or 'auto', got {delta!r}")
    if not auto:
        delta = check_nonnegative(delta, "delta")

    rng = as_generator(seed)
    if dist is None:
        dist = pairwise_distances(coords)
    n_inh = n - k
    perms = np.argsort(rng.random((restarts, m)), axis=1)
    out = np.empty(n_inh, dtype=np.int64)
    if auto:
        iu = np.triu_indices(m, 1)
        candidates = np.unique(dist[iu])
        delta = float(_auto_delta(dist, perms, n_inh, candidates, out))
    elif _try_delta(dist, perms, n_inh, float(delta), out) < 0:
        raise InhibitionInfeasibleError(
            f"no inhibited sample of {n_inh} points with delta={delta} in {restarts} restarts"
        )
    chosen = [int(i) for i in out]

    pairs = []
    if k:
        taken = set(chosen)
        primaries = rng.choice(chosen, size=k, replace=False)
        for p in primaries:
            near = [j for j in np.flatnonzero(dist[p] <= eta) if j not in taken]
            if not near:
                raise InhibitionInfeasibleError(f"no unselected frame point within eta={eta} of point {p}")
            c = int(rng.choice(near))
            chosen.append(c)
            taken.add(c)
            pairs.append((int(p), c))

    idx = np.sort(np.array(chosen, dtype=np.int64))
    params = {"delta": delta, "k": k, "eta": eta, "index": idx, "pairs": pairs}
    return PointSet(coords[idx], scheme="inhibited", seed=seed, params=params)


def simple_random_subsample(frame, n, seed=None):
    """Uniform sample of ``n`` frame points without replacement."""
    coords = _as_coords(frame)
    n = check_count(n, "n")
    if n > coords.shape[0]:
        raise ValidationError(f"n={n} exceeds frame size {coords.shape[0]}")
    rng = as_generator(seed)
    idx = np.sort(rng.choice(coords.shape[0], size=n, replace=False))
    return PointSet(coords[idx], scheme="uniform", seed=seed, params={"index": idx})
