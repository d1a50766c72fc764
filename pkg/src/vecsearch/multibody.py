"""Multi-object constrained similarity search.

Finds m ordered corpus objects jointly closest to an m-object query while
honoring inter-object constraints (class identity, shared scene, temporal
overlap, spatial relations).  An alignment's score is the weighted sum of
per-position distances, minimized over injective mappings.

Execution paths:

* ``brute_force_best``: enumerate every injective mapping (the oracle);
* ``optimal_assignment``: Hungarian method for the polynomial special case
  where constraints reduce to per-position eligibility;
* ``strategy_per_object``: per-position top-k' candidate retrieval with a
  doubling k' and a threshold-style optimality certificate;
* ``strategy_constraint_first``: enumerate tuples seeded from the pairs
  satisfying a selective spatial constraint (uniform grid) or from class
  partitions, then score only feasible tuples;
* ``warm_start_window``: reuse the previous sliding window's alignment when
  a lower-bound check proves it still optimal.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .store import Metric, as_embedding, distance


@dataclass(frozen=True)
class SceneObject:
    scene_id: int
    object_id: int
    class_label: str
    embedding: np.ndarray
    frame_span: tuple[int, int] | None = None
    centroid: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.frame_span is not None and self.frame_span[0] > self.frame_span[1]:
            raise ValueError("frame_span start must not exceed end")


@dataclass
class MultiQuery:
    """Ordered query objects (class label, embedding) plus aggregate weights."""

    objects: list[tuple[str, np.ndarray]]
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not self.objects:
            raise ValueError("query needs at least one object")
        if self.weights is None:
            self.weights = np.ones(len(self.objects))
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (len(self.objects),):
            raise ValueError("one weight per query object required")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise ValueError("weights must be positive and finite")

    @property
    def m(self) -> int:
        return len(self.objects)


@dataclass(frozen=True)
class Alignment:
    """Injective mapping of query positions to object uids, plus its score."""

    mapping: tuple[int, ...]
    score: float


# --- constraints -----------------------------------------------------------

@dataclass(frozen=True)
class ClassMatch:
    i: int


@dataclass(frozen=True)
class SameScene:
    pass


@dataclass(frozen=True)
class TemporalOverlap:
    pass


@dataclass(frozen=True)
class NextTo:
    i: int
    j: int
    max_dist: float

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise ValueError("NextTo needs two distinct positions")
        if self.max_dist <= 0:
            raise ValueError("max_dist must be positive")


@dataclass(frozen=True)
class AngleOnTop:
    """Angle of (centroid_i - centroid_j) from the vertical-up axis.

    Screen coordinates, y growing downward; up is (0, -1).  The angle is
    the absolute deviation from up in degrees, range [0, 180], bounds
    inclusive.  lo=0, hi=30 reads "i sits above j, within 30 degrees".
    """

    i: int
    j: int
    lo_deg: float
    hi_deg: float

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise ValueError("AngleOnTop needs two distinct positions")
        if self.lo_deg > self.hi_deg:
            raise ValueError("lo_deg must not exceed hi_deg")


Constraint = ClassMatch | SameScene | TemporalOverlap | NextTo | AngleOnTop


def _check_positions(constraints: list[Constraint], m: int) -> None:
    for c in constraints:
        refs: tuple[int, ...] = ()
        if isinstance(c, ClassMatch):
            refs = (c.i,)
        elif isinstance(c, (NextTo, AngleOnTop)):
            refs = (c.i, c.j)
        for r in refs:
            if not 0 <= r < m:
                raise ValueError(
                    f"constraint {c!r} references position {r}, "
                    f"query has {m} objects")


def _spans_overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def angle_from_up(src: tuple[float, float], dst: tuple[float, float]) -> float:
    """Degrees between the vector dst->src and screen-up, in [0, 180]."""
    vx = src[0] - dst[0]
    vy = src[1] - dst[1]
    norm = math.hypot(vx, vy)
    if norm == 0.0:
        raise ValueError("coincident centroids have no angle")
    # up is (0, -1) in screen coordinates
    cos_theta = max(-1.0, min(1.0, -vy / norm))
    return math.degrees(math.acos(cos_theta))


def constraint_satisfied(c: Constraint, mapped: list[SceneObject],
                         query: MultiQuery) -> bool:
    """Evaluate one constraint on a full mapping.

    Spatial and temporal constraints fail when the needed centroid or
    frame_span is missing; they cannot be verified for such objects.
    """
    if isinstance(c, ClassMatch):
        return mapped[c.i].class_label == query.objects[c.i][0]
    if isinstance(c, SameScene):
        return len({o.scene_id for o in mapped}) <= 1
    if isinstance(c, TemporalOverlap):
        spans = [o.frame_span for o in mapped]
        if any(s is None for s in spans):
            return False
        return all(_spans_overlap(a, b)
                   for a, b in itertools.combinations(spans, 2))
    if isinstance(c, NextTo):
        ca, cb = mapped[c.i].centroid, mapped[c.j].centroid
        if ca is None or cb is None:
            return False
        return math.hypot(ca[0] - cb[0], ca[1] - cb[1]) <= c.max_dist
    if isinstance(c, AngleOnTop):
        ca, cb = mapped[c.i].centroid, mapped[c.j].centroid
        if ca is None or cb is None or ca == cb:
            return False
        return c.lo_deg <= angle_from_up(ca, cb) <= c.hi_deg
    raise TypeError(f"unknown constraint {c!r}")


def all_satisfied(constraints: list[Constraint], mapping: tuple[int, ...],
                  objects: list[SceneObject], query: MultiQuery) -> bool:
    mapped = [objects[u] for u in mapping]
    return all(constraint_satisfied(c, mapped, query) for c in constraints)


# --- scoring ---------------------------------------------------------------

def position_scores(objects: list[SceneObject], query: MultiQuery,
                    metric: Metric = Metric.EUCLIDEAN) -> np.ndarray:
    """(m, n) matrix of weighted per-position distances.

    Shared by the oracle and every strategy so that equal alignments get
    bit-identical scores.
    """
    m, n = query.m, len(objects)
    scores = np.empty((m, n))
    for i, (_, q_emb) in enumerate(query.objects):
        w = float(query.weights[i])
        for u, obj in enumerate(objects):
            scores[i, u] = w * distance(as_embedding(q_emb),
                                        as_embedding(obj.embedding), metric)
    return scores


def _tuple_score(scores: np.ndarray, mapping: tuple[int, ...]) -> float:
    total = 0.0
    for i, u in enumerate(mapping):
        total += float(scores[i, u])
    return total


def _better(score: float, mapping: tuple[int, ...],
            best: tuple[float, tuple[int, ...]] | None) -> bool:
    if best is None:
        return True
    if score != best[0]:
        return score < best[0]
    return mapping < best[1]


def count_alignments(n: int, m: int) -> int:
    """Number of injective mappings of m query slots onto n objects."""
    if m > n:
        raise ValueError(f"cannot align {m} query objects to {n} candidates")
    out = 1
    for t in range(n, n - m, -1):
        out *= t
    return out


def brute_force_best(objects: list[SceneObject], query: MultiQuery,
                     constraints: list[Constraint],
                     metric: Metric = Metric.EUCLIDEAN) -> Alignment | None:
    """Enumerate every injective mapping; the ground truth for all strategies.

    Ties are broken toward the lexicographically smallest uid tuple.  None
    when no mapping satisfies the constraints.
    """
    _check_positions(constraints, query.m)
    n = len(objects)
    if query.m > n:
        return None
    scores = position_scores(objects, query, metric)
    best: tuple[float, tuple[int, ...]] | None = None
    for mapping in itertools.permutations(range(n), query.m):
        if not all_satisfied(constraints, mapping, objects, query):
            continue
        s = _tuple_score(scores, mapping)
        if _better(s, mapping, best):
            best = (s, mapping)
    if best is None:
        return None
    return Alignment(mapping=best[1], score=best[0])


# --- Hungarian method ------------------------------------------------------

def optimal_assignment(cost: np.ndarray,
                       eligibility: np.ndarray | None = None) -> Alignment | None:
    """Minimum-cost injective assignment via the Hungarian method.

    Potentials + shortest augmenting path, handling rectangular m <= n
    matrices.  Ineligible cells are treated as unusable; None when no full
    assignment over eligible cells exists.  Matches brute force whenever the
    constraint set reduces to per-row eligibility.
    """
    cost = np.asarray(cost, dtype=np.float64)
    m, n = cost.shape
    if m > n:
        raise ValueError(f"more query rows ({m}) than candidates ({n})")
    a = cost.copy()
    if eligibility is not None:
        elig = np.asarray(eligibility, dtype=bool)
        if elig.shape != cost.shape:
            raise ValueError("eligibility mask shape must match cost")
        a[~elig] = np.inf

    INF = np.inf
    u = [0.0] * (m + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)      # p[j]: 1-based row matched to column j
    way = [0] * (n + 1)
    for i in range(1, m + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = -1
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = a[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            if not math.isfinite(delta):
                return None  # no augmenting path: eligible cells cannot cover
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    mapping = [-1] * m
    for j in range(1, n + 1):
        if p[j]:
            mapping[p[j] - 1] = j - 1
    total = 0.0
    for i in range(m):
        total += float(cost[i, mapping[i]])
    return Alignment(mapping=tuple(mapping), score=total)


# --- execution strategies --------------------------------------------------

@dataclass
class MultibodyStats:
    """Counters a strategy fills in when handed to it."""

    strategy: str = ""
    pairs_considered: int = 0
    tuples_scored: int = 0
    rounds: int = 0
    warm_accepted: bool = False


def _eligible_by_position(objects: list[SceneObject], query: MultiQuery,
                          constraints: list[Constraint]) -> list[list[int]]:
    """Per-position candidate uids after ClassMatch filtering."""
    class_positions = {c.i for c in constraints if isinstance(c, ClassMatch)}
    out: list[list[int]] = []
    for i in range(query.m):
        if i in class_positions:
            want = query.objects[i][0]
            out.append([u for u, o in enumerate(objects) if o.class_label == want])
        else:
            out.append(list(range(len(objects))))
    return out


def _join_best(cands: list[list[int]], objects: list[SceneObject],
               query: MultiQuery, constraints: list[Constraint],
               scores: np.ndarray,
               stats: MultibodyStats | None = None) -> Alignment | None:
    """Best feasible injective tuple from the per-position candidate lists.

    Partitioned by scene when SameScene is among the constraints (the cross
    product within each scene is strictly smaller); otherwise the full cross
    product is searched so cross-scene alignments stay reachable.
    """
    best: tuple[float, tuple[int, ...]] | None = None
    same_scene = any(isinstance(c, SameScene) for c in constraints)

    if same_scene:
        scene_ids = sorted({o.scene_id for o in objects})
        groups = [
            [[u for u in cand if objects[u].scene_id == s] for cand in cands]
            for s in scene_ids
        ]
    else:
        groups = [cands]

    for group in groups:
        if any(not cand for cand in group):
            continue
        for mapping in itertools.product(*group):
            if len(set(mapping)) != len(mapping):
                continue
            if not all_satisfied(constraints, mapping, objects, query):
                continue
            if stats is not None:
                stats.tuples_scored += 1
            s = _tuple_score(scores, mapping)
            if _better(s, mapping, best):
                best = (s, mapping)
    if best is None:
        return None
    return Alignment(mapping=best[1], score=best[0])


def strategy_per_object(objects: list[SceneObject], query: MultiQuery,
                        constraints: list[Constraint], k0: int = 4,
                        metric: Metric = Metric.EUCLIDEAN,
                        stats: MultibodyStats | None = None) -> Alignment | None:
    """Per-position top-k' retrieval, join, and escalation.

    Each position retrieves its k' nearest eligible candidates; the joined
    best is returned only when a threshold bound certifies that no alignment
    using an object outside the candidate lists could score lower.  On
    failure (no feasible join, or bound not met) k' doubles; at k' >= n the
    join covers every eligible object and equals brute force.
    """
    if k0 < 1:
        raise ValueError("k0 must be >= 1")
    _check_positions(constraints, query.m)
    if stats is not None:
        stats.strategy = "per-object"
    n = len(objects)
    if query.m > n:
        return None
    eligible = _eligible_by_position(objects, query, constraints)
    if any(not e for e in eligible):
        return None
    scores = position_scores(objects, query, metric)
    # Eligible uids per position, nearest first (ties by uid).
    ranked = [
        sorted(e, key=lambda u, i=i: (scores[i, u], u))
        for i, e in enumerate(eligible)
    ]

    kprime = k0
    while True:
        if stats is not None:
            stats.rounds += 1
        cands = [r[:kprime] for r in ranked]
        best = _join_best(cands, objects, query, constraints, scores, stats)
        covered = all(len(r) <= kprime for r in ranked)
        if covered or kprime >= n:
            return best
        if best is not None:
            # Threshold certificate: an alignment leaving the candidate
            # lists pays at least the k'-th distance at some position and
            # the per-position minimum everywhere else.
            mins = [scores[i, r[0]] for i, r in enumerate(ranked)]
            tau = math.inf
            for i, r in enumerate(ranked):
                if len(r) <= kprime:
                    continue  # position fully covered, no outside object
                bound = scores[i, cands[i][-1]] + sum(
                    mins[j] for j in range(query.m) if j != i)
                tau = min(tau, bound)
            if best.score <= tau:
                return best
        kprime *= 2


def _grid_pairs(objects: list[SceneObject], left: list[int], right: list[int],
                max_dist: float, same_scene: bool) -> list[tuple[int, int]]:
    """Ordered (left, right) uid pairs with centroids within max_dist.

    Uniform grid with cell edge max_dist: qualifying partners always sit in
    the 3x3 cell neighborhood.
    """
    cell = max_dist
    grid: dict[tuple[int, int], list[int]] = {}
    for u in right:
        c = objects[u].centroid
        if c is None:
            continue
        key = (math.floor(c[0] / cell), math.floor(c[1] / cell))
        grid.setdefault(key, []).append(u)
    pairs: list[tuple[int, int]] = []
    for a in left:
        ca = objects[a].centroid
        if ca is None:
            continue
        ax, ay = math.floor(ca[0] / cell), math.floor(ca[1] / cell)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for b in grid.get((ax + dx, ay + dy), ()):
                    if b == a:
                        continue
                    if same_scene and objects[b].scene_id != objects[a].scene_id:
                        continue
                    cb = objects[b].centroid
                    if math.hypot(ca[0] - cb[0], ca[1] - cb[1]) <= max_dist:
                        pairs.append((a, b))
    return pairs


def strategy_constraint_first(objects: list[SceneObject], query: MultiQuery,
                              constraints: list[Constraint],
                              metric: Metric = Metric.EUCLIDEAN,
                              stats: MultibodyStats | None = None
                              ) -> Alignment | None:
    """Filter by the most selective constraint before scoring.

    With a spatial constraint present, candidate tuples grow out of the
    ordered pairs that satisfy it (grid-accelerated for NextTo); with only
    class constraints, tuples come from the class partitions.  Without
    either, falls back to the per-object strategy.  Every surviving tuple is
    checked against the full constraint set, so the result matches brute
    force.
    """
    _check_positions(constraints, query.m)
    spatial = [c for c in constraints if isinstance(c, (NextTo, AngleOnTop))]
    has_class = any(isinstance(c, ClassMatch) for c in constraints)
    if not spatial and not has_class:
        return strategy_per_object(objects, query, constraints,
                                   metric=metric, stats=stats)
    if stats is not None:
        stats.strategy = "constraint-first"
    n = len(objects)
    if query.m > n:
        return None
    eligible = _eligible_by_position(objects, query, constraints)
    if any(not e for e in eligible):
        return None
    scores = position_scores(objects, query, metric)

    if not spatial:
        # Class partitions alone already shrink the cross product.
        return _join_best(eligible, objects, query, constraints, scores, stats)

    anchor = next((c for c in spatial if isinstance(c, NextTo)), spatial[0])
    same_scene = any(isinstance(c, SameScene) for c in constraints)
    if isinstance(anchor, NextTo):
        pairs = _grid_pairs(objects, eligible[anchor.i], eligible[anchor.j],
                            anchor.max_dist, same_scene)
    else:
        pairs = []
        for a in eligible[anchor.i]:
            for b in eligible[anchor.j]:
                if a == b:
                    continue
                mapped_ok = (objects[a].centroid is not None
                             and objects[b].centroid is not None
                             and objects[a].centroid != objects[b].centroid)
                if not mapped_ok:
                    continue
                if same_scene and objects[a].scene_id != objects[b].scene_id:
                    continue
                ang = angle_from_up(objects[a].centroid, objects[b].centroid)
                if anchor.lo_deg <= ang <= anchor.hi_deg:
                    pairs.append((a, b))
    if stats is not None:
        stats.pairs_considered = len(pairs)

    rest = [i for i in range(query.m) if i not in (anchor.i, anchor.j)]
    best: tuple[float, tuple[int, ...]] | None = None
    for a, b in pairs:
        pools = []
        for i in rest:
            pool = [u for u in eligible[i] if u != a and u != b]
            if same_scene:
                pool = [u for u in pool
                        if objects[u].scene_id == objects[a].scene_id]
            pools.append(pool)
        if any(not pool for pool in pools):
            continue
        for extension in itertools.product(*pools):
            if len(set(extension)) != len(extension):
                continue
            mapping_list = [0] * query.m
            mapping_list[anchor.i] = a
            mapping_list[anchor.j] = b
            for i, u in zip(rest, extension):
                mapping_list[i] = u
            mapping = tuple(mapping_list)
            if not all_satisfied(constraints, mapping, objects, query):
                continue
            if stats is not None:
                stats.tuples_scored += 1
            s = _tuple_score(scores, mapping)
            if _better(s, mapping, best):
                best = (s, mapping)
    if best is None:
        return None
    return Alignment(mapping=best[1], score=best[0])


def warm_start_window(prev: Alignment | None, window_shift: int,
                      objects: list[SceneObject], query: MultiQuery,
                      constraints: list[Constraint],
                      metric: Metric = Metric.EUCLIDEAN,
                      stats: MultibodyStats | None = None) -> Alignment | None:
    """Carry the previous window's alignment into a shifted window.

    With shift 0 the previous alignment is returned as-is.  Otherwise the
    previous mapping is re-scored on the shifted window's objects and kept
    only when it meets the unconstrained lower bound (sum of per-position
    minima), which proves no alignment can score lower.  Everything else
    falls back to a full per-object run, so the result always equals the
    oracle.
    """
    if prev is not None and window_shift == 0:
        if stats is not None:
            stats.warm_accepted = True
        return prev

    if prev is not None:
        n = len(objects)
        if all(u < n for u in prev.mapping) and all_satisfied(
                constraints, prev.mapping, objects, query):
            scores = position_scores(objects, query, metric)
            rescored = _tuple_score(scores, prev.mapping)
            eligible = _eligible_by_position(objects, query, constraints)
            if all(e for e in eligible):
                lower = sum(min(scores[i, u] for u in e)
                            for i, e in enumerate(eligible))
                if rescored <= lower:
                    if stats is not None:
                        stats.warm_accepted = True
                    return Alignment(mapping=prev.mapping, score=rescored)

    return strategy_per_object(objects, query, constraints,
                               metric=metric, stats=stats)


# --- scenes file format ----------------------------------------------------

def save_scenes(objects: list[SceneObject], path: str | Path) -> None:
    """Write the .scenes.json format, grouping objects by scene."""
    scenes: dict[int, list[SceneObject]] = {}
    for obj in objects:
        scenes.setdefault(obj.scene_id, []).append(obj)
    doc = {"scenes": [
        {
            "scene_id": scene_id,
            "objects": [
                {
                    "object_id": o.object_id,
                    "class": o.class_label,
                    "embedding": [float(x) for x in np.asarray(o.embedding)],
                    "frame_span": list(o.frame_span) if o.frame_span else None,
                    "centroid": list(o.centroid) if o.centroid else None,
                }
                for o in objs
            ],
        }
        for scene_id, objs in sorted(scenes.items())
    ]}
    Path(path).write_text(json.dumps(doc, indent=1))


def load_scenes(path: str | Path) -> list[SceneObject]:
    """Read .scenes.json; uids are the flattened positions in file order."""
    doc = json.loads(Path(path).read_text())
    objects: list[SceneObject] = []
    seen: set[tuple[int, int]] = set()
    for scene in doc["scenes"]:
        for row in scene["objects"]:
            key = (int(scene["scene_id"]), int(row["object_id"]))
            if key in seen:
                raise ValueError(f"duplicate (scene_id, object_id) {key}")
            seen.add(key)
            objects.append(SceneObject(
                scene_id=key[0],
                object_id=key[1],
                class_label=row["class"],
                embedding=as_embedding(row["embedding"]),
                frame_span=tuple(row["frame_span"]) if row.get("frame_span") else None,
                centroid=tuple(row["centroid"]) if row.get("centroid") else None,
            ))
    return objects


def parse_constraints(rows: list[dict]) -> list[Constraint]:
    """Constraint list from its JSON wire form."""
    out: list[Constraint] = []
    for row in rows:
        kind = row.get("kind")
        if kind == "class_match":
            out.append(ClassMatch(i=int(row["i"])))
        elif kind == "same_scene":
            out.append(SameScene())
        elif kind == "temporal_overlap":
            out.append(TemporalOverlap())
        elif kind == "next_to":
            out.append(NextTo(i=int(row["i"]), j=int(row["j"]),
                              max_dist=float(row["max_dist"])))
        elif kind == "angle_on_top":
            out.append(AngleOnTop(i=int(row["i"]), j=int(row["j"]),
                                  lo_deg=float(row["lo_deg"]),
                                  hi_deg=float(row["hi_deg"])))
        else:
            raise ValueError(f"unknown constraint kind {kind!r}")
    return out


def constraints_to_json(constraints: list[Constraint]) -> list[dict]:
    out = []
    for c in constraints:
        if isinstance(c, ClassMatch):
            out.append({"kind": "class_match", "i": c.i})
        elif isinstance(c, SameScene):
            out.append({"kind": "same_scene"})
        elif isinstance(c, TemporalOverlap):
            out.append({"kind": "temporal_overlap"})
        elif isinstance(c, NextTo):
            out.append({"kind": "next_to", "i": c.i, "j": c.j,
                        "max_dist": c.max_dist})
        elif isinstance(c, AngleOnTop):
            out.append({"kind": "angle_on_top", "i": c.i, "j": c.j,
                        "lo_deg": c.lo_deg, "hi_deg": c.hi_deg})
    return out
