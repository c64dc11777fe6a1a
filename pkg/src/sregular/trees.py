"""Word-indexed trees of centers and radii certifying Ahlfors regularity.

A regular tree stores, for every admissible word I up to a depth, a center
x_I and a radius r_I, together with constants for the five defining
properties: separation of incomparable nodes, containment of descendants,
mass conservation of r^s along levels, radius decay, and two-sided
parent/child ratio bounds.  Trees are built either from an IFS with a
certified open set, or from greedy packing hierarchies of a point sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .counting import canonical_order, _greedy_keep_mask
from .errors import DomainError, PreconditionError
from .geometry import (
    Ifs,
    PointCloud,
    check_osc,
    moran_dimension,
    witness_diameter,
    witness_interior_distance,
)
from .symbolic import SubshiftFT, Word, word_from_string, word_to_string


@dataclass
class TreeConstants:
    C: float
    D: float
    rho: float
    R: float
    E: float
    s: float

    def to_json(self):
        return {
            "C": self.C, "D": self.D, "rho": self.rho,
            "R": self.R, "E": self.E, "s": self.s,
        }

    @classmethod
    def from_json(cls, doc):
        return cls(**{k: float(doc[k]) for k in ("C", "D", "rho", "R", "E", "s")})


class RegularTree:
    """Finite-depth tree of (x_I, r_I) nodes over admissible words."""

    def __init__(
        self,
        shift: SubshiftFT,
        nodes: Mapping[Word, tuple],
        constants: TreeConstants,
        meta: dict | None = None,
    ):
        if () not in nodes:
            raise DomainError("tree must contain the root (empty word)")
        words = sorted(nodes, key=lambda w: (len(w), w))
        self.shift = shift
        self.words = words
        self.index = {w: i for i, w in enumerate(words)}
        self.x = np.asarray([np.atleast_1d(np.asarray(nodes[w][0], dtype=float))
                             for w in words])
        self.r = np.asarray([float(nodes[w][1]) for w in words])
        if np.any(self.r <= 0):
            raise DomainError("all radii must be positive")
        root_r = self.r[self.index[()]]
        if abs(root_r - 1.0) > 1e-12:
            raise DomainError("root radius must be normalized to 1")
        self.depth = max(len(w) for w in words)
        self.constants = constants
        self.meta = dict(meta or {})
        for w in words:
            if w and w[:-1] not in self.index:
                raise DomainError(f"node {w} has no stored parent")

    @property
    def ambient_dim(self):
        return self.x.shape[1]

    def __len__(self):
        return len(self.words)

    def node(self, word: Word):
        i = self.index[tuple(word)]
        return self.x[i], self.r[i]

    def children(self, word: Word) -> list[Word]:
        word = tuple(word)
        out = []
        for j in range(self.shift.alphabet_size):
            cand = word + (j,)
            if cand in self.index:
                out.append(cand)
        return out

    def level(self, n: int) -> list[Word]:
        return [w for w in self.words if len(w) == n]

    def to_json(self) -> dict:
        return {
            "alphabet": self.shift.alphabet_size,
            "transition": self.shift.transition.astype(int).tolist(),
            "depth": self.depth,
            "constants": self.constants.to_json(),
            "nodes": {
                word_to_string(w): {
                    "x": self.x[i].tolist(),
                    "r": float(self.r[i]),
                }
                for w, i in self.index.items()
            },
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "RegularTree":
        shift = SubshiftFT.from_json(doc)
        nodes = {
            word_from_string(k): (np.asarray(v["x"], dtype=float), float(v["r"]))
            for k, v in doc["nodes"].items()
        }
        return cls(
            shift,
            nodes,
            TreeConstants.from_json(doc["constants"]),
            meta=doc.get("meta"),
        )


# ---------------------------------------------------------------------------
# construction from an IFS


def tree_from_ifs(ifs: Ifs, x0, depth: int, require_certified: bool = True) -> RegularTree:
    """Tree of x_I = phi_I(x0), r_I = prod of ratios, on the full shift.

    Constants come from the open-set witness: C is the distance of x0 to
    the witness complement, D the witness diameter, rho and R the extreme
    contraction ratios, E = 1 (the level sums are exact products).
    """
    if depth < 0:
        raise DomainError("depth must be nonnegative")
    if require_certified:
        report = check_osc(ifs)
        if not report.certified:
            raise PreconditionError(
                f"open-set condition not certified: {report.status} "
                f"({report.reason})"
            )
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if ifs.witness:
        C = witness_interior_distance(ifs.witness, x0)
        D = witness_diameter(ifs.witness)
    else:
        C, D = math.nan, math.nan
    ratios = ifs.ratios
    constants = TreeConstants(
        C=C, D=D, rho=min(ratios), R=max(ratios), E=1.0,
        s=moran_dimension(ratios),
    )
    shift = SubshiftFT.full(len(ifs.maps))
    nodes = {(): (x0, 1.0)}
    frontier = [((), np.eye(len(x0)), np.zeros(len(x0)), 1.0)]
    for _ in range(depth):
        nxt = []
        for word, A, b, r in frontier:
            for j, m in enumerate(ifs.maps):
                A2 = A @ m.matrix
                b2 = A @ m.translation + b
                w2 = word + (j,)
                nodes[w2] = (A2 @ x0 + b2, r * m.ratio)
                nxt.append((w2, A2, b2, r * m.ratio))
        frontier = nxt
    return RegularTree(
        shift, nodes, constants,
        meta={"mode": "ifs", "depth": depth, "x0": x0.tolist()},
    )


# ---------------------------------------------------------------------------
# construction from packing hierarchies


def tree_from_packing(
    cloud: PointCloud,
    delta: float,
    s: float,
    depth: int,
    weights=None,
) -> RegularTree:
    """Build a tree from greedy maximal delta^n-separated subsets.

    Level n is the greedy maximal delta^n-separated subset of the cloud in
    canonical order; each level-(n+1) point attaches to its nearest
    level-n point (ties to the earlier point in the order).  Radii carry
    the weighted empirical measure: every cloud point is routed down the
    tree by the same nearest-child rule, each node's mass is the weight of
    the points routed through it, and r_I = mass^(1/s).  The level-sum
    identity sum r_{Ij}^s = r_I^s is then exact by construction.
    """
    if not 0 < delta < 1 / 6:
        raise DomainError("delta must lie in (0, 1/6)")
    if s <= 0:
        raise DomainError("regularity exponent s must be positive")
    if depth < 1:
        raise DomainError("depth must be at least 1")
    if cloud.resolution > delta**depth / 2:
        raise PreconditionError(
            f"cloud resolution {cloud.resolution:g} too coarse for "
            f"delta^depth = {delta**depth:g}"
        )
    pts = cloud.points
    n = pts.shape[0]
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n,) or np.any(w < 0):
            raise DomainError("weights must be nonnegative, one per point")
        total = w.sum()
        if abs(total - 1.0) > 1e-9:
            raise DomainError("weights must sum to 1")
        w = w / total

    order = canonical_order(pts)
    sorted_pts = pts[order]
    sorted_w = w[order]

    # greedy maximal delta^n-separated levels (level 0 is the first point)
    levels = [np.array([0])]
    for m in range(1, depth + 1):
        keep = _greedy_keep_mask(sorted_pts, delta**m)
        if not keep.any():
            raise DomainError(f"empty packing level at depth {m}")
        levels.append(np.nonzero(keep)[0])

    # attach each level-(m+1) point to its nearest level-m point
    words_of = [{0: ()}]
    child_words: dict[Word, list[int]] = {(): []}
    node_xyr: dict[Word, tuple] = {(): (sorted_pts[0], None)}
    children_of: dict[Word, list[Word]] = {}
    for m in range(depth):
        parents = levels[m]
        kids = levels[m + 1]
        dmat = cdist(sorted_pts[kids], sorted_pts[parents])
        nearest = dmat.argmin(axis=1)
        word_map = {}
        kid_lists: dict[int, list[int]] = {}
        for kpos, par in zip(range(len(kids)), nearest):
            kid_lists.setdefault(int(par), []).append(kpos)
        for par, kid_positions in kid_lists.items():
            parent_word = words_of[m][int(parents[par])]
            for rank, kpos in enumerate(kid_positions):
                wd = parent_word + (rank,)
                word_map[int(kids[kpos])] = wd
                node_xyr[wd] = (sorted_pts[kids[kpos]], None)
            children_of[parent_word] = [
                parent_word + (rank,) for rank in range(len(kid_positions))
            ]
        words_of.append(word_map)

    for m in range(depth + 1):
        for pos, wd in words_of[m].items():
            children_of.setdefault(wd, [])

    # route every cloud point down the tree by the nearest-child rule
    leaf_mass: dict[Word, float] = {}
    current_words = [()] * n
    for m in range(depth):
        groups: dict[Word, list[int]] = {}
        for i in range(n):
            groups.setdefault(current_words[i], []).append(i)
        for wd, members in groups.items():
            kids = children_of[wd]
            if not kids:
                raise DomainError(f"node {wd} has no children to route through")
            kid_coords = np.stack([node_xyr[k][0] for k in kids])
            dmat = cdist(sorted_pts[members], kid_coords)
            pick = dmat.argmin(axis=1)
            for i, p in zip(members, pick):
                current_words[i] = kids[int(p)]
    for i in range(n):
        leaf_mass[current_words[i]] = leaf_mass.get(current_words[i], 0.0) + sorted_w[i]

    # masses accumulate bottom-up; radii are mass^(1/s)
    mass: dict[Word, float] = dict(leaf_mass)
    for wd in sorted(children_of, key=len, reverse=True):
        kids = children_of[wd]
        if kids:
            mass[wd] = sum(mass.get(k, 0.0) for k in kids)
    root_mass = mass[()]
    if root_mass <= 0:
        raise DomainError("no mass reached the root")
    nodes = {}
    max_branch = 1
    for wd, (x, _) in node_xyr.items():
        mw = mass.get(wd, 0.0)
        if mw <= 0:
            raise DomainError(f"node {wd} received zero mass; adjust weights")
        nodes[wd] = (x, (mw / root_mass) ** (1.0 / s))
        kids = children_of[wd]
        max_branch = max(max_branch, len(kids))

    ratios = [
        nodes[wd][1] / nodes[wd[:-1]][1] for wd in nodes if wd
    ]
    constants = TreeConstants(
        C=math.nan, D=math.nan,
        rho=min(ratios), R=max(ratios), E=1.0, s=s,
    )
    shift = SubshiftFT.full(max(max_branch, 2))
    tree = RegularTree(
        shift, nodes, constants,
        meta={"mode": "packing", "delta": delta, "depth": depth,
              "n_points": int(n)},
    )
    measured = measure_constants(tree)
    tree.constants = TreeConstants(
        C=measured.C, D=measured.D, rho=constants.rho,
        R=constants.R, E=1.0, s=s,
    )
    return tree


# ---------------------------------------------------------------------------
# certification


@dataclass
class TreeAxiomCheck:
    name: str
    ok: bool
    measured: float
    witness: tuple | None = None


@dataclass
class AxiomReport:
    checks: list
    measured: TreeConstants

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def __getitem__(self, name: str) -> TreeAxiomCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _ancestor_pairs_mask(tree: RegularTree) -> np.ndarray:
    """Boolean (n, n) mask of comparable pairs (one word a prefix of the
    other, including equal)."""
    n = len(tree)
    mask = np.eye(n, dtype=bool)
    for w, i in tree.index.items():
        for k in range(len(w)):
            j = tree.index[w[:k]]
            mask[i, j] = mask[j, i] = True
    return mask


def _descendants(tree: RegularTree) -> dict[Word, list[int]]:
    desc: dict[Word, list[int]] = {w: [tree.index[w]] for w in tree.words}
    for w in sorted(tree.words, key=len, reverse=True):
        if w:
            desc[w[:-1]].extend(desc[w])
    return desc


def measure_constants(tree: RegularTree) -> TreeConstants:
    """Worst-case constants over all stored node pairs."""
    n = len(tree)
    dmat = cdist(tree.x, tree.x)
    comparable = _ancestor_pairs_mask(tree)
    rsum = tree.r[:, None] + tree.r[None, :]
    ratio = np.where(~comparable, dmat / rsum, np.inf)
    C = float(ratio.min()) if n > 1 else math.inf

    D = 0.0
    for w, rows in _descendants(tree).items():
        if len(rows) > 1:
            diam = float(pdist(tree.x[rows]).max())
            D = max(D, diam / tree.r[tree.index[w]])

    child_ratios = [
        tree.r[tree.index[w]] / tree.r[tree.index[w[:-1]]]
        for w in tree.words
        if w
    ]
    rho = min(child_ratios) if child_ratios else math.nan
    R = max(child_ratios) if child_ratios else math.nan

    E = 1.0
    s = tree.constants.s
    for w in tree.words:
        target = tree.r[tree.index[w]] ** s
        level_rows: dict[int, float] = {}
        for other in tree.words:
            if len(other) > len(w) and other[: len(w)] == w:
                rel = len(other) - len(w)
                level_rows[rel] = level_rows.get(rel, 0.0) + (
                    tree.r[tree.index[other]] ** s
                )
        for total in level_rows.values():
            E = max(E, total / target, target / total)
    return TreeConstants(C=C, D=D, rho=rho, R=R, E=E, s=s)


def verify_axioms(tree: RegularTree, tol: float = 1e-9) -> AxiomReport:
    """Exhaustive certification of the tree properties over stored nodes.

    Separation and containment compare the measured worst case against the
    stored constants; mass conservation requires the level sums of r^s to
    match r_I^s within ``tol`` (the measured spread is reported as E);
    decay reports the largest deepest-level radius; the ratio bounds check
    the stored rho and R and that R < 1.
    """
    checks = []
    n = len(tree)
    s = tree.constants.s

    dmat = cdist(tree.x, tree.x)
    comparable = _ancestor_pairs_mask(tree)
    rsum = tree.r[:, None] + tree.r[None, :]
    with np.errstate(invalid="ignore"):
        ratio = np.where(~comparable, dmat / rsum, np.inf)
    if np.isfinite(ratio).any():
        flat = int(ratio.argmin())
        i, j = divmod(flat, n)
        C_meas = float(ratio[i, j])
        stored_C = tree.constants.C
        ok = C_meas > 0 and (
            math.isnan(stored_C) or C_meas >= stored_C * (1 - 1e-12)
        )
        checks.append(
            TreeAxiomCheck(
                "separation", ok, C_meas,
                witness=None if ok else (tree.words[i], tree.words[j]),
            )
        )
    else:
        C_meas = math.inf
        checks.append(TreeAxiomCheck("separation", True, math.inf))

    D_meas = 0.0
    D_witness = None
    for w, rows in _descendants(tree).items():
        if len(rows) > 1:
            diam = float(pdist(tree.x[rows]).max())
            val = diam / tree.r[tree.index[w]]
            if val > D_meas:
                D_meas, D_witness = val, (w,)
    stored_D = tree.constants.D
    ok = math.isnan(stored_D) or D_meas <= stored_D * (1 + 1e-12)
    checks.append(
        TreeAxiomCheck("containment", ok, D_meas, None if ok else D_witness)
    )

    E_meas = 1.0
    worst_dev = 0.0
    mass_witness = None
    desc = _descendants(tree)
    for w in tree.words:
        target = tree.r[tree.index[w]] ** s
        sums: dict[int, float] = {}
        for row in desc[w]:
            other = tree.words[row]
            rel = len(other) - len(w)
            if rel > 0:
                sums[rel] = sums.get(rel, 0.0) + tree.r[row] ** s
        for rel, total in sums.items():
            dev = abs(total / target - 1.0)
            E_meas = max(E_meas, total / target, target / total)
            if dev > worst_dev:
                worst_dev, mass_witness = dev, (w, rel)
    ok = worst_dev <= tol
    checks.append(
        TreeAxiomCheck("mass-conservation", ok, worst_dev,
                       None if ok else mass_witness)
    )
    checks.append(TreeAxiomCheck("mass-spread-E", E_meas <= 1 + tol, E_meas))

    deepest = [tree.r[tree.index[w]] for w in tree.level(tree.depth)]
    r_deep = max(deepest) if deepest else math.nan
    checks.append(TreeAxiomCheck("decay", r_deep < 1.0, r_deep))

    child_ratios = np.array(
        [
            tree.r[tree.index[w]] / tree.r[tree.index[w[:-1]]]
            for w in tree.words
            if w
        ]
    )
    if child_ratios.size:
        rho_meas = float(child_ratios.min())
        R_meas = float(child_ratios.max())
        ok_lo = rho_meas >= tree.constants.rho * (1 - 1e-12)
        ok_hi = R_meas <= tree.constants.R * (1 + 1e-12) and R_meas < 1.0
        checks.append(TreeAxiomCheck("ratio-lower", ok_lo, rho_meas))
        checks.append(TreeAxiomCheck("ratio-upper", ok_hi, R_meas))
        rho_m, R_m = rho_meas, R_meas
    else:
        rho_m = R_m = math.nan

    measured = TreeConstants(C=C_meas, D=D_meas, rho=rho_m, R=R_m, E=E_meas, s=s)
    return AxiomReport(checks, measured)


# ---------------------------------------------------------------------------
# operations on trees


def pruned_mass(
    tree: RegularTree, choice: Callable[[Word], int], word: Word, m: int
) -> float:
    """Total r^s at relative depth m below ``word`` after removing, at
    every intermediate node, the subtree of the chosen child.

    The result never exceeds E^2 * r_I^s * (1 - rho^s)^m.
    """
    word = tuple(word)
    if word not in tree.index:
        raise DomainError(f"word {word} not stored")
    if m < 0 or len(word) + m > tree.depth:
        raise DomainError("relative depth m exceeds the stored depth")
    s = tree.constants.s
    frontier = [word]
    for _ in range(m):
        nxt = []
        for w in frontier:
            kids = tree.children(w)
            if not kids:
                raise DomainError(f"node {w} has no stored children")
            chosen = w + (int(choice(w)),)
            if chosen not in tree.index:
                raise DomainError(
                    f"choice at {w} selects the missing child {chosen}"
                )
            nxt.extend(k for k in kids if k != chosen)
        frontier = nxt
    return float(sum(tree.r[tree.index[w]] ** s for w in frontier))


def power_tree(tree: RegularTree, m: int) -> RegularTree:
    """Recode to blocks of m symbols: nodes at new depth k are exactly the
    stored nodes at depth m*k, with identical centers and radii."""
    if m < 1:
        raise DomainError("block length m must be >= 1")
    if m == 1:
        return tree
    new_depth = tree.depth // m
    if new_depth < 1:
        raise DomainError(f"stored depth {tree.depth} too shallow for m={m}")
    patterns = sorted(
        {
            w[k * m : (k + 1) * m]
            for w in tree.words
            if len(w) % m == 0
            for k in range(len(w) // m)
        }
    )
    pat_index = {p: i for i, p in enumerate(patterns)}
    nodes = {}
    for w in tree.words:
        if len(w) % m == 0 and len(w) <= new_depth * m:
            blocks = tuple(
                pat_index[w[k * m : (k + 1) * m]] for k in range(len(w) // m)
            )
            i = tree.index[w]
            nodes[blocks] = (tree.x[i], tree.r[i])
    c = tree.constants
    constants = TreeConstants(
        C=c.C, D=c.D, rho=c.rho**m, R=c.R**m, E=c.E, s=c.s
    )
    shift = SubshiftFT.full(max(len(patterns), 2))
    return RegularTree(
        shift, nodes, constants,
        meta={**tree.meta, "power": m},
    )


def ratio_limit_diagnostic(tree: RegularTree, i: int, prefix: Word) -> np.ndarray:
    """The series r_{i . (prefix|_n)} / r_{prefix|_n} for growing n.

    For trees built from an IFS the series is constant (the contraction
    ratio of map i); for packing trees it tracks the local measure ratio
    and its tail estimates the limiting per-symbol contraction.
    """
    prefix = tuple(prefix)
    if (i,) not in tree.index:
        raise DomainError(f"symbol {i} does not extend the root")
    series = []
    for n in range(len(prefix) + 1):
        base = prefix[:n]
        ext = (i,) + base
        if base not in tree.index or ext not in tree.index:
            break
        series.append(tree.r[tree.index[ext]] / tree.r[tree.index[base]])
    if not series:
        raise DomainError("prefix does not extend within the stored depth")
    return np.asarray(series)
