"""Iterated function systems of contracting similarities, open-set
certification, attractor sampling, and conformal maps.

Open-set witnesses are unions of open axis-aligned boxes and open balls;
their images under similarities stay closed-form, so the certification
checks are exact.  Certification is conservative: it never reports
"certified" unless every check is provable, and it reports "not
certifiable" (distinct from "violated") when the available primitives
cannot decide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .errors import BudgetError, DomainError, PreconditionError

DEFAULT_POINT_BUDGET = 10**7
_BOOTSTRAP_CAP = 3000


# ---------------------------------------------------------------------------
# witness primitives


@dataclass(frozen=True)
class Box:
    """Open axis-aligned box (lo_1, hi_1) x ... x (lo_d, hi_d)."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lo)
        hi = tuple(float(x) for x in self.hi)
        if len(lo) != len(hi) or not lo:
            raise DomainError("box corners must have equal positive dimension")
        if any(a >= b for a, b in zip(lo, hi)):
            raise DomainError("box must have positive extent in every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return len(self.lo)

    def contains_point(self, x) -> bool:
        return all(a < v < b for a, v, b in zip(self.lo, x, self.hi))

    def boundary_distance(self, x) -> float:
        """Distance from an interior point to the box boundary."""
        return min(
            min(v - a, b - v) for a, v, b in zip(self.lo, x, self.hi)
        )

    def vertices(self) -> np.ndarray:
        d = self.dim
        out = np.empty((2**d, d))
        for i in range(2**d):
            for a in range(d):
                out[i, a] = self.hi[a] if (i >> a) & 1 else self.lo[a]
        return out

    def diameter(self) -> float:
        return math.dist(self.lo, self.hi)


@dataclass(frozen=True)
class Ball:
    """Open Euclidean ball."""

    center: tuple
    radius: float

    def __post_init__(self):
        center = tuple(float(x) for x in self.center)
        if not center:
            raise DomainError("ball center must be nonempty")
        if self.radius <= 0:
            raise DomainError("ball radius must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return len(self.center)

    def contains_point(self, x) -> bool:
        return math.dist(self.center, x) < self.radius

    def boundary_distance(self, x) -> float:
        return self.radius - math.dist(self.center, x)

    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class RotBox:
    """Image of a box under a non-axis-aligned similarity: center,
    half-extents in the local frame, and the frame rotation."""

    center: np.ndarray
    half: np.ndarray
    rot: np.ndarray  # columns are the local axes in world coordinates

    @property
    def dim(self):
        return self.center.shape[0]

    def vertices(self) -> np.ndarray:
        d = self.dim
        corners = Box(tuple(-self.half), tuple(self.half)).vertices()
        return corners @ self.rot.T + self.center

    def point_distance(self, x) -> float:
        """Distance from a point to the (closed) rotated box."""
        local = self.rot.T @ (np.asarray(x, dtype=float) - self.center)
        excess = np.maximum(np.abs(local) - self.half, 0.0)
        return float(np.linalg.norm(excess))


# ---------------------------------------------------------------------------
# similarities and systems


class Similarity:
    """Contracting similarity x -> ratio * Q x + translation with Q
    orthogonal; distances scale exactly by the ratio."""

    def __init__(self, ratio: float, translation, rotation=None):
        if not 0 < ratio < 1:
            raise DomainError("similarity ratio must lie in (0, 1)")
        t = np.asarray(translation, dtype=float).reshape(-1)
        d = t.shape[0]
        if rotation is None:
            Q = np.eye(d)
        else:
            Q = np.asarray(rotation, dtype=float)
            if Q.shape != (d, d):
                raise DomainError("rotation shape does not match translation")
            if np.abs(Q.T @ Q - np.eye(d)).max() > 1e-12:
                raise DomainError("rotation matrix is not orthogonal to 1e-12")
        self.ratio = float(ratio)
        self.rotation = Q
        self.translation = t
        self.matrix = ratio * Q
        for arr in (self.rotation, self.translation, self.matrix):
            arr.setflags(write=False)

    @property
    def dim(self):
        return self.translation.shape[0]

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        return pts @ self.matrix.T + self.translation

    def fixed_point(self) -> np.ndarray:
        d = self.dim
        return np.linalg.solve(np.eye(d) - self.matrix, self.translation)

    def is_axis_aligned(self, tol: float = 1e-13) -> bool:
        """True when the rotation is a signed permutation, so axis-aligned
        boxes map to axis-aligned boxes."""
        A = np.abs(self.rotation)
        return bool(
            (np.abs(A.sum(axis=0) - 1) < tol).all()
            and (np.abs(A.sum(axis=1) - 1) < tol).all()
            and (np.abs(A * (1 - A)) < tol).all()
        )

    def image_of(self, prim):
        """Exact image of a witness primitive."""
        if isinstance(prim, Ball):
            c = self(np.asarray(prim.center))
            return Ball(tuple(c), self.ratio * prim.radius)
        if isinstance(prim, Box):
            if self.is_axis_aligned():
                a = self(np.asarray(prim.lo))
                b = self(np.asarray(prim.hi))
                lo = np.minimum(a, b)
                hi = np.maximum(a, b)
                return Box(tuple(lo), tuple(hi))
            center = self(0.5 * (np.asarray(prim.lo) + np.asarray(prim.hi)))
            half = self.ratio * 0.5 * (np.asarray(prim.hi) - np.asarray(prim.lo))
            return RotBox(center, half, self.rotation.copy())
        raise DomainError(f"unsupported primitive {type(prim).__name__}")


class Ifs:
    """An iterated function system of N >= 2 contracting similarities,
    optionally with an open-set witness (union of boxes and balls)."""

    def __init__(self, maps: Sequence[Similarity], open_set_witness=None):
        maps = list(maps)
        if len(maps) < 2:
            raise DomainError("an IFS needs at least two maps")
        d = maps[0].dim
        if any(m.dim != d for m in maps):
            raise DomainError("all maps must share the ambient dimension")
        self.maps = maps
        self.witness = list(open_set_witness) if open_set_witness else None
        if self.witness and any(p.dim != d for p in self.witness):
            raise DomainError("witness primitives must match the ambient dimension")

    @property
    def dim(self):
        return self.maps[0].dim

    @property
    def ratios(self):
        return [m.ratio for m in self.maps]

    def similarity_dimension(self) -> float:
        return moran_dimension(self.ratios)

    def compose(self, word) -> Similarity:
        """The similarity phi_{I} = phi_{i1} o ... o phi_{in}."""
        d = self.dim
        A = np.eye(d)
        b = np.zeros(d)
        ratio = 1.0
        for s in word:
            m = self.maps[s]
            b = A @ m.translation + b
            A = A @ m.matrix
            ratio *= m.ratio
        sim = Similarity.__new__(Similarity)
        sim.ratio = ratio
        sim.matrix = A
        sim.translation = b
        sim.rotation = A / ratio if ratio > 0 else np.eye(d)
        return sim


def moran_dimension(ratios) -> float:
    """Unique s with sum(r_i^s) = 1, by bisection on the strictly
    decreasing map s -> sum r_i^s."""
    r = [float(x) for x in ratios]
    if len(r) < 2:
        raise DomainError("at least two contraction ratios required")
    if any(not 0 < x < 1 for x in r):
        raise DomainError("ratios must lie in (0, 1)")

    def f(s):
        return sum(x**s for x in r) - 1.0

    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16 * max(1.0, hi):
            break
    s = 0.5 * (lo + hi)
    if abs(f(s)) > 1e-12:
        raise DomainError("bisection failed to resolve the dimension")
    return s


def attractor_point(ifs: Ifs, word) -> np.ndarray:
    """Fixed point of phi_word: an exact attractor point."""
    if not word:
        raise DomainError("word must be nonempty")
    return ifs.compose(tuple(word)).fixed_point()


# ---------------------------------------------------------------------------
# open set condition


@dataclass
class OscReport:
    """Outcome of the open-set checks.

    ``status`` is "certified", "violated", or "not-certifiable"; the last
    means the primitives at hand cannot decide (no witness, or geometry the
    exact checks do not cover), which is different from a violation.
    """

    status: str
    checks: list = field(default_factory=list)
    violating_pair: tuple | None = None
    reason: str | None = None

    @property
    def certified(self):
        return self.status == "certified"


def _inside_single(image, prim) -> float | None:
    """Signed containment margin of an image primitive inside one witness
    primitive, or None if not contained.  Exact for these shapes."""
    if isinstance(image, Ball):
        if isinstance(prim, Ball):
            m = prim.radius - (math.dist(prim.center, image.center) + image.radius)
            return m if m >= 0 else None
        if isinstance(prim, Box):
            m = min(
                min(c - image.radius - a, b - c - image.radius)
                for a, c, b in zip(prim.lo, image.center, prim.hi)
            )
            return m if m >= 0 else None
    verts = image.vertices() if isinstance(image, (Box, RotBox)) else None
    if verts is None:
        return None
    if isinstance(prim, Box):
        lo = np.asarray(prim.lo)
        hi = np.asarray(prim.hi)
        m = float(min((verts - lo).min(), (hi - verts).min()))
        return m if m >= 0 else None
    if isinstance(prim, Ball):
        dmax = float(np.linalg.norm(verts - np.asarray(prim.center), axis=1).max())
        m = prim.radius - dmax
        return m if m >= 0 else None
    return None


def _separation(a, b):
    """(disjoint, margin) for two open primitives; margin is the gap
    (negative overlap depth when they meet).  None when undecidable."""
    if isinstance(a, Ball) and isinstance(b, Ball):
        gap = math.dist(a.center, b.center) - a.radius - b.radius
        return gap >= 0, gap
    if isinstance(a, Box) and isinstance(b, Box):
        gaps = [
            max(la - hb, lb - ha)
            for la, ha, lb, hb in zip(a.lo, a.hi, b.lo, b.hi)
        ]
        gap = max(gaps)
        return gap >= 0, gap
    if isinstance(a, Ball) and isinstance(b, (Box, RotBox)):
        a, b = b, a
    if isinstance(a, (Box, RotBox)) and isinstance(b, Ball):
        if isinstance(a, Box):
            diff = np.maximum(
                np.maximum(np.asarray(a.lo) - b.center, b.center - np.asarray(a.hi)),
                0.0,
            )
            dist = float(np.linalg.norm(diff))
        else:
            dist = a.point_distance(b.center)
        gap = dist - b.radius
        return gap >= 0, gap
    # box-ish vs box-ish with at least one rotated: separating axis test
    va = a.vertices()
    vb = b.vertices()
    axes = []
    for prim in (a, b):
        if isinstance(prim, Box):
            axes.extend(np.eye(len(prim.lo)))
        else:
            axes.extend(prim.rot.T)
    best = -math.inf
    for axis in axes:
        pa = va @ axis
        pb = vb @ axis
        gap = max(pb.min() - pa.max(), pa.min() - pb.max())
        best = max(best, gap)
    if best >= 0:
        return True, best
    if va.shape[1] <= 2:
        # in the plane the face normals are a complete axis set
        return False, best
    return None, best


def check_osc(ifs: Ifs) -> OscReport:
    """Certify the open-set condition for the stored witness.

    Containment is certified when every image primitive fits inside a
    single witness primitive (sufficient, exact); disjointness is checked
    pairwise between image primitives.  Geometry the primitives cannot
    decide yields status "not-certifiable" rather than a verdict.
    """
    if not ifs.witness:
        return OscReport(status="not-certifiable", reason="no open-set witness")
    checks = []
    images = [[m.image_of(p) for p in ifs.witness] for m in ifs.maps]
    for i, prims in enumerate(images):
        for k, img in enumerate(prims):
            margins = [_inside_single(img, w) for w in ifs.witness]
            margins = [m for m in margins if m is not None]
            if not margins:
                return OscReport(
                    status="not-certifiable",
                    checks=checks,
                    reason=(
                        f"image {k} of map {i} fits no single witness "
                        "primitive; union containment is not decided"
                    ),
                )
            checks.append(
                {"check": f"map{i}:containment[{k}]", "ok": True, "margin": max(margins)}
            )
    for i in range(len(ifs.maps)):
        for j in range(i + 1, len(ifs.maps)):
            worst = math.inf
            for pa in images[i]:
                for pb in images[j]:
                    verdict, gap = _separation(pa, pb)
                    if verdict is None:
                        return OscReport(
                            status="not-certifiable",
                            checks=checks,
                            reason=f"maps ({i},{j}): separation undecided",
                        )
                    if not verdict:
                        checks.append(
                            {"check": f"disjoint[{i},{j}]", "ok": False, "margin": gap}
                        )
                        return OscReport(
                            status="violated",
                            checks=checks,
                            violating_pair=(i, j),
                            reason=f"images of maps {i} and {j} overlap",
                        )
                    worst = min(worst, gap)
            checks.append({"check": f"disjoint[{i},{j}]", "ok": True, "margin": worst})
    return OscReport(status="certified", checks=checks)


def witness_diameter(witness) -> float:
    """Exact diameter of a union of boxes and balls."""

    def pair_sup(a, b):
        if isinstance(a, Ball) and isinstance(b, Ball):
            return math.dist(a.center, b.center) + a.radius + b.radius
        if isinstance(a, Box) and isinstance(b, Box):
            per_axis = [
                max(abs(ha - lb), abs(hb - la))
                for la, ha, lb, hb in zip(a.lo, a.hi, b.lo, b.hi)
            ]
            return math.hypot(*per_axis)
        if isinstance(a, Ball):
            a, b = b, a
        # a box, b ball
        dmax = np.linalg.norm(a.vertices() - np.asarray(b.center), axis=1).max()
        return float(dmax) + b.radius

    prims = list(witness)
    return max(
        pair_sup(prims[i], prims[j])
        for i in range(len(prims))
        for j in range(i, len(prims))
    )


def witness_interior_distance(witness, x) -> float:
    """Certified lower bound on dist(x, complement of the witness union):
    the best boundary distance among primitives containing x."""
    best = 0.0
    for p in witness:
        if p.contains_point(x):
            best = max(best, p.boundary_distance(x))
    if best <= 0:
        raise PreconditionError("point does not lie inside the witness")
    return best


# ---------------------------------------------------------------------------
# point clouds


class PointCloud:
    """Finite sample of a compact set: an (n, d) array plus the resolution
    the generator guarantees (not inferred from the data)."""

    def __init__(self, points, resolution: float):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise DomainError("point cloud must be a nonempty (n, d) array")
        if not np.isfinite(pts).all():
            raise DomainError("point cloud contains non-finite coordinates")
        if resolution <= 0:
            raise DomainError("resolution must be positive")
        self.points = pts
        self.points.setflags(write=False)
        self.resolution = float(resolution)

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def bounding_box(self):
        return self.points.min(axis=0), self.points.max(axis=0)

    def subset(self, indices) -> "PointCloud":
        return PointCloud(self.points[np.asarray(indices)], self.resolution)


def write_cloud(cloud: PointCloud, path):
    """Text format: header `dim=<d> delta=<float> n=<count>`, then one point
    per line with 17 significant digits."""
    with open(path, "w") as fh:
        fh.write(
            f"dim={cloud.ambient_dim} delta={cloud.resolution:.17g} n={len(cloud)}\n"
        )
        for row in cloud.points:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def read_cloud(path) -> PointCloud:
    with open(path) as fh:
        header = fh.readline().split()
        try:
            fields = dict(kv.split("=") for kv in header)
            d = int(fields["dim"])
            delta = float(fields["delta"])
            n = int(fields["n"])
        except (ValueError, KeyError):
            raise DomainError(f"malformed cloud header in {path}") from None
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (n, d):
        raise DomainError(
            f"cloud body {data.shape} does not match header ({n}, {d})"
        )
    return PointCloud(data, delta)


def _seed_radius_bound(ifs: Ifs, seed: np.ndarray) -> float:
    """R with K and all orbit points inside B(seed, R)."""
    worst = 0.0
    for m in ifs.maps:
        c = np.linalg.norm(m(seed) - seed)
        worst = max(worst, c / (1.0 - m.ratio))
    return worst


def _bootstrap_diameter(ifs: Ifs, seed: np.ndarray) -> float:
    """Deterministic estimate of diam K from a coarse uniform expansion;
    slightly below the true diameter, converging as the depth grows."""
    n = len(ifs.maps)
    depth = 1
    while n ** (depth + 1) <= _BOOTSTRAP_CAP:
        depth += 1
    pts = seed[None, :]
    for _ in range(depth):
        pts = np.concatenate([m(pts) for m in ifs.maps], axis=0)
    return float(pdist(pts).max())


def sample_attractor(
    ifs: Ifs,
    delta: float,
    seed=None,
    budget: int = DEFAULT_POINT_BUDGET,
) -> PointCloud:
    """Sample the attractor at resolution delta.

    Words are expanded in lexicographic order and a representative
    phi_I(seed) is emitted exactly when r_I * diam0 first drops to delta,
    where diam0 is the bootstrap diameter estimate.  The output lists the
    emitted points in depth-first word order and is deterministic.
    """
    if delta <= 0:
        raise DomainError("delta must be positive")
    if seed is None:
        seed = attractor_point(ifs, (0,))
    seed = np.asarray(seed, dtype=float).reshape(-1)
    if seed.shape[0] != ifs.dim:
        raise DomainError("seed dimension does not match the system")
    diam0 = _bootstrap_diameter(ifs, seed)
    if diam0 <= delta:
        return PointCloud(seed[None, :], delta)

    d = ifs.dim
    n_maps = len(ifs.maps)
    mats = np.stack([m.matrix for m in ifs.maps])
    trans = np.stack([m.translation for m in ifs.maps])
    ratios = np.asarray(ifs.ratios)

    # level-synchronous expansion of the affine compositions; "live" nodes
    # still have r_I * diam0 > delta
    live_A = np.eye(d)[None, :, :]
    live_b = np.zeros((1, d))
    live_r = np.ones(1)
    live_words = np.zeros((1, 0), dtype=np.int16)
    done_pts = []
    done_words = []
    total = 0
    while live_r.size:
        n_live = live_r.size
        A = np.einsum("nij,mjk->nmik", live_A, mats).reshape(-1, d, d)
        b = (
            np.einsum("nij,mj->nmi", live_A, trans) + live_b[:, None, :]
        ).reshape(-1, d)
        r = (live_r[:, None] * ratios[None, :]).reshape(-1)
        words = np.concatenate(
            [
                np.repeat(live_words, n_maps, axis=0),
                np.tile(
                    np.arange(n_maps, dtype=np.int16), n_live
                )[:, None],
            ],
            axis=1,
        )
        emit = r * diam0 <= delta
        if emit.any():
            pts = A[emit] @ seed + b[emit]
            total += pts.shape[0]
            if total > budget:
                raise BudgetError(
                    "attractor sampling exceeded the point budget",
                    visited=total,
                )
            done_pts.append(pts)
            done_words.append(words[emit])
        keep = ~emit
        live_A, live_b, live_r, live_words = A[keep], b[keep], r[keep], words[keep]

    points = np.concatenate(done_pts, axis=0)
    # emitted words form an antichain; pad and lexsort to recover the
    # depth-first enumeration order
    max_len = max(w.shape[1] for w in done_words)
    padded = np.full((points.shape[0], max_len), -1, dtype=np.int16)
    row = 0
    for w in done_words:
        padded[row : row + w.shape[0], : w.shape[1]] = w
        row += w.shape[0]
    order = np.lexsort(padded.T[::-1])
    return PointCloud(points[order], delta)


# ---------------------------------------------------------------------------
# conformal maps


class ConformalMap:
    """Conformal transformations with closed-form derivative magnitude.

    Kinds: "affine" (scale * rotation + shift), "inversion" in a sphere,
    and "moebius" on the plane.  ``domain_margin`` is the minimum allowed
    distance to the singular locus; when None it defaults to 10x the cloud
    resolution at application time.
    """

    def __init__(self, kind: str, domain_margin: float | None = None, **params):
        self.kind = kind
        self.domain_margin = domain_margin
        if kind == "affine":
            scale = float(params["scale"])
            if scale <= 0:
                raise DomainError("affine scale must be positive")
            t = np.asarray(params["translation"], dtype=float).reshape(-1)
            d = t.shape[0]
            Q = params.get("rotation")
            Q = np.eye(d) if Q is None else np.asarray(Q, dtype=float)
            if np.abs(Q.T @ Q - np.eye(d)).max() > 1e-12:
                raise DomainError("affine rotation is not orthogonal")
            self.scale, self.rotation, self.translation = scale, Q, t
        elif kind == "inversion":
            self.center = np.asarray(params["center"], dtype=float).reshape(-1)
            self.radius = float(params["radius"])
            if self.radius <= 0:
                raise DomainError("inversion radius must be positive")
        elif kind == "moebius":
            coeffs = [complex(*params[k]) if not isinstance(params[k], complex)
                      else params[k] for k in ("a", "b", "c", "d")]
            self.a, self.b, self.c, self.d = coeffs
            if abs(self.a * self.d - self.b * self.c) < 1e-300:
                raise DomainError("moebius coefficients must have ad - bc != 0")
        else:
            raise DomainError(f"unknown conformal map kind {kind!r}")

    # -- evaluation ---------------------------------------------------------

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.kind == "affine":
            return pts @ (self.scale * self.rotation).T + self.translation
        if self.kind == "inversion":
            rel = pts - self.center
            norms2 = (rel**2).sum(axis=-1, keepdims=True)
            return self.center + self.radius**2 * rel / norms2
        z = pts[..., 0] + 1j * pts[..., 1]
        w = (self.a * z + self.b) / (self.c * z + self.d)
        return np.stack([w.real, w.imag], axis=-1)

    def deriv_magnitude(self, points: np.ndarray) -> np.ndarray:
        """|lambda_x|: the scalar local scaling factor of the derivative."""
        pts = np.asarray(points, dtype=float)
        if self.kind == "affine":
            return np.full(pts.shape[:-1], self.scale)
        if self.kind == "inversion":
            d2 = ((pts - self.center) ** 2).sum(axis=-1)
            return self.radius**2 / d2
        z = pts[..., 0] + 1j * pts[..., 1]
        det = self.a * self.d - self.b * self.c
        return np.abs(det) / np.abs(self.c * z + self.d) ** 2

    def singular_distance(self, points: np.ndarray) -> np.ndarray:
        """Distance of each point to the singular locus (inf when empty)."""
        pts = np.asarray(points, dtype=float)
        if self.kind == "affine":
            return np.full(pts.shape[:-1], np.inf)
        if self.kind == "inversion":
            return np.sqrt(((pts - self.center) ** 2).sum(axis=-1))
        if self.c == 0:
            return np.full(pts.shape[:-1], np.inf)
        pole = -self.d / self.c
        z = pts[..., 0] + 1j * pts[..., 1]
        return np.abs(z - pole)

    def inverse(self) -> "ConformalMap":
        if self.kind == "affine":
            Qt = self.rotation.T
            return ConformalMap(
                "affine",
                scale=1.0 / self.scale,
                rotation=Qt,
                translation=-(Qt @ self.translation) / self.scale,
            )
        if self.kind == "inversion":
            return ConformalMap(
                "inversion", center=tuple(self.center), radius=self.radius,
                domain_margin=self.domain_margin,
            )
        return ConformalMap(
            "moebius", a=self.d, b=-self.b, c=-self.c, d=self.a,
            domain_margin=self.domain_margin,
        )

    def lipschitz_bounds(self, lo, hi) -> tuple[float, float]:
        """Exact extremes of |lambda_x| over the closed box [lo, hi]; valid
        Lipschitz constants on the box by conformality and convexity."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.kind == "affine":
            return self.scale, self.scale
        if self.kind == "inversion":
            near = np.linalg.norm(np.maximum(lo - self.center,
                                             np.maximum(self.center - hi, 0.0)))
            corners = Box(tuple(lo), tuple(hi)).vertices()
            far = np.linalg.norm(corners - self.center, axis=1).max()
            if near <= 0:
                raise DomainError("box touches the inversion center")
            return self.radius**2 / far**2, self.radius**2 / near**2
        if self.c == 0:
            lam = abs(self.a / self.d)
            return lam, lam
        pole = np.array([(-self.d / self.c).real, (-self.d / self.c).imag])
        near = np.linalg.norm(np.maximum(lo - pole, np.maximum(pole - hi, 0.0)))
        corners = Box(tuple(lo), tuple(hi)).vertices()
        far = np.linalg.norm(corners - pole, axis=1).max()
        if near <= 0:
            raise DomainError("box touches the moebius pole")
        det = abs(self.a * self.d - self.b * self.c)
        c2 = abs(self.c) ** 2
        return det / (c2 * far**2), det / (c2 * near**2)

    def to_json(self) -> dict:
        doc = {"kind": self.kind}
        if self.domain_margin is not None:
            doc["margin"] = self.domain_margin
        if self.kind == "affine":
            doc.update(
                scale=self.scale,
                rotation=self.rotation.tolist(),
                translation=self.translation.tolist(),
            )
        elif self.kind == "inversion":
            doc.update(center=list(self.center), radius=self.radius)
        else:
            doc.update(
                a=[self.a.real, self.a.imag], b=[self.b.real, self.b.imag],
                c=[self.c.real, self.c.imag], d=[self.d.real, self.d.imag],
            )
        return doc

    @classmethod
    def from_json(cls, doc: Mapping) -> "ConformalMap":
        doc = dict(doc)
        kind = doc.pop("kind")
        margin = doc.pop("margin", None)
        return cls(kind, domain_margin=margin, **doc)


def apply_map(cmap: ConformalMap, cloud: PointCloud) -> PointCloud:
    """Pointwise image of the cloud; the new resolution is the old one
    scaled by the conservative Lipschitz bound over the cloud's box."""
    margin = cmap.domain_margin
    if margin is None:
        margin = 10.0 * cloud.resolution
    dist = cmap.singular_distance(cloud.points)
    bad = np.nonzero(dist < margin)[0]
    if bad.size:
        i = int(bad[0])
        raise DomainError(
            f"point {i} at {cloud.points[i].tolist()} is within {margin:g} "
            "of the singular locus"
        )
    lo, hi = cloud.bounding_box()
    _, l_hi = cmap.lipschitz_bounds(lo, hi)
    return PointCloud(cmap.apply(cloud.points), cloud.resolution * l_hi)


# ---------------------------------------------------------------------------
# almost-similarity estimation


_PAIR_CAP = 200_000


def _pair_subsample(n: int) -> np.ndarray:
    """Deterministic point subset whose full pair set stays under the cap."""
    max_pts = int((1 + math.isqrt(1 + 8 * _PAIR_CAP)) // 2)
    if n <= max_pts:
        return np.arange(n)
    return np.unique(np.round(np.linspace(0, n - 1, max_pts)).astype(int))


def estimate_almost_similarity(
    cmap: ConformalMap,
    cloud: PointCloud,
    enlargement: PointCloud | None = None,
) -> tuple[float, float]:
    """Distortion of the map over the sampled set.

    Over all point pairs, q(x, y) = |F(x) - F(y)| / |x - y|; returns
    ``(C_K, deviation)`` with C_K the geometric mean of the extreme ratios
    and deviation = sqrt(q_max / q_min) >= 1.  Deviation is exactly 1 for
    affine maps (up to rounding) and grows with the set diameter for
    genuinely nonlinear conformal maps.
    """
    pts = cloud.points
    if enlargement is not None:
        pts = np.concatenate([pts, enlargement.points], axis=0)
    if pts.shape[0] < 2:
        raise DomainError("at least two points required")
    margin = cmap.domain_margin
    if margin is None:
        margin = 10.0 * cloud.resolution
    if (cmap.singular_distance(pts) < margin).any():
        raise DomainError("sample approaches the singular locus")
    idx = _pair_subsample(pts.shape[0])
    sel = pts[idx]
    img = cmap.apply(sel)
    ii, jj = np.triu_indices(sel.shape[0], k=1)
    src = np.linalg.norm(sel[ii] - sel[jj], axis=1)
    dst = np.linalg.norm(img[ii] - img[jj], axis=1)
    ok = src > 0
    q = dst[ok] / src[ok]
    if q.size == 0:
        raise DomainError("all selected points coincide")
    q_min, q_max = float(q.min()), float(q.max())
    return math.sqrt(q_max * q_min), math.sqrt(q_max / q_min)


@dataclass
class ExponentFit:
    """Least-squares fit of log(deviation - 1) against log(diameter)."""

    alpha: float | None
    amplitude: float | None
    exact_similarity: bool
    diameters: list = field(default_factory=list)
    deviations: list = field(default_factory=list)


def almost_similarity_exponent_fit(cmap: ConformalMap, clouds) -> ExponentFit:
    """Fit the distortion exponent over nested sample scales.

    Each cloud contributes (diam, deviation); the slope of
    log(deviation - 1) vs log(diam) estimates the Hoelder exponent of the
    map's derivative.  All-deviations-one yields the exact-similarity
    verdict instead of a fit.
    """
    clouds = list(clouds)
    if len(clouds) < 4:
        raise PreconditionError("at least 4 nested scales required")
    diams, devs = [], []
    for cloud in clouds:
        idx = _pair_subsample(len(cloud))
        sel = cloud.points[idx]
        ii, jj = np.triu_indices(sel.shape[0], k=1)
        diam = float(np.linalg.norm(sel[ii] - sel[jj], axis=1).max())
        _, dev = estimate_almost_similarity(cmap, cloud)
        diams.append(diam)
        devs.append(dev)
    # rounding alone pushes the measured deviation of an exact similarity
    # up to ~eps * |x| / min-pair-distance above 1, so the verdict threshold
    # sits well above that but far below any genuine nonlinear distortion
    if all(dev - 1 < 1e-6 for dev in devs):
        return ExponentFit(None, None, True, diams, devs)
    x = np.log(diams)
    y = np.log(np.asarray(devs) - 1.0)
    slope, intercept = np.polyfit(x, y, 1)
    return ExponentFit(float(slope), float(math.exp(intercept)), False, diams, devs)


# ---------------------------------------------------------------------------
# canned systems and JSON loading


def cantor_ifs(r0: float = 1 / 3, r1: float | None = None) -> Ifs:
    """Two maps on the line: x -> r0 x and x -> r1 x + (1 - r1), with the
    unit interval as witness."""
    if r1 is None:
        r1 = r0
    if r0 + r1 > 1:
        raise DomainError("ratios must satisfy r0 + r1 <= 1 for disjointness")
    return Ifs(
        [Similarity(r0, [0.0]), Similarity(r1, [1.0 - r1])],
        open_set_witness=[Box((0.0,), (1.0,))],
    )


def sierpinski_ifs() -> Ifs:
    """Three half-scale maps toward the corners of a unit triangle, with a
    three-box staircase witness inside the triangle."""
    h = math.sqrt(3) / 2
    verts = [(0.0, 0.0), (1.0, 0.0), (0.5, h)]
    maps = [Similarity(0.5, np.asarray(v) / 2) for v in verts]
    witness = [
        Box((0.0, 0.0), (0.5, h / 2)),
        Box((0.5, 0.0), (1.0, h / 2)),
        Box((0.25, h / 2), (0.75, h)),
    ]
    return Ifs(maps, open_set_witness=witness)


def ifs_from_json(doc: Mapping) -> Ifs:
    maps = [
        Similarity(
            m["ratio"], m["translation"], rotation=m.get("rotation")
        )
        for m in doc["maps"]
    ]
    witness = None
    if "open_set" in doc:
        witness = [
            Box(tuple(b["lo"]), tuple(b["hi"]))
            for b in doc["open_set"].get("boxes", [])
        ] + [
            Ball(tuple(b["center"]), b["radius"])
            for b in doc["open_set"].get("balls", [])
        ]
    return Ifs(maps, open_set_witness=witness)


def ifs_to_json(ifs: Ifs) -> dict:
    doc = {
        "maps": [
            {
                "ratio": m.ratio,
                "rotation": m.rotation.tolist(),
                "translation": m.translation.tolist(),
            }
            for m in ifs.maps
        ]
    }
    if ifs.witness:
        boxes = [
            {"lo": list(p.lo), "hi": list(p.hi)}
            for p in ifs.witness
            if isinstance(p, Box)
        ]
        balls = [
            {"center": list(p.center), "radius": p.radius}
            for p in ifs.witness
            if isinstance(p, Ball)
        ]
        doc["open_set"] = {"boxes": boxes, "balls": balls}
    return doc
