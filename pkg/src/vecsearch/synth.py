"""Seeded synthetic data generators for benchmarks and property tests.

Each generator is deterministic given its seed and produces instances with
a known planted structure: Gaussian clusters of unequal spread, correlated
clouds with corner queries, separable clusters, event logs with planted
task instances, scene graphs with planted tuples, and slow trajectories
for warm-start sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .multibody import (AngleOnTop, ClassMatch, Constraint, MultiQuery,
                        NextTo, SameScene, SceneObject, TemporalOverlap)
from .store import Metric, VectorStore
from .subsequence import EventSeries


# --- cluster generators ------------------------------------------------------

def two_gaussians(seed: int, n_per: int = 500, sigma_a: float = 1.0,
                  sigma_b: float = 3.0, separation: float = 7.0,
                  query_offset: float = 2.5) -> tuple[VectorStore, np.ndarray, str]:
    """Two 2-D Gaussian clusters of unequal spread plus an in-cluster query.

    Class "a" is tight (sigma_a) at the origin; class "b" is broad
    (sigma_b) at (separation, 0).  The query sits inside the tight cluster,
    offset toward the broad one, where plain top-k mixes the classes.

    Returns (store, query, query_class).
    """
    rng = np.random.default_rng(seed)
    pts_a = rng.normal(loc=(0.0, 0.0), scale=sigma_a, size=(n_per, 2))
    pts_b = rng.normal(loc=(separation, 0.0), scale=sigma_b, size=(n_per, 2))
    matrix = np.vstack([pts_a, pts_b]).astype(np.float32)
    classes = ["a"] * n_per + ["b"] * n_per
    store = VectorStore(matrix, classes, metric=Metric.EUCLIDEAN)
    query = np.array([query_offset, 0.0], dtype=np.float32)
    return store, query, "a"


def correlated_corner(seed: int, n: int = 500, rho: float = 0.9,
                      corner: float = 2.0) -> tuple[VectorStore, np.ndarray]:
    """Correlated 2-D cloud with a query at an extreme corner.

    Points follow N(0, [[1, rho], [rho, 1]]); the query sits at the corner
    of the cloud, about two standard deviations out along the correlated
    diagonal.  Plain distance retrieves a ball pulled toward the dense
    center; hyperplane ranking retrieves the extreme end of the cigar.

    Returns (store, query).
    """
    rng = np.random.default_rng(seed)
    cov = np.array([[1.0, rho], [rho, 1.0]])
    pts = rng.multivariate_normal(mean=(0.0, 0.0), cov=cov, size=n)
    store = VectorStore(pts.astype(np.float32), metric=Metric.EUCLIDEAN)
    query = np.array([corner, corner], dtype=np.float32)
    return store, query


def separable_clusters(seed: int, n_per: int = 100, dim: int = 4,
                       gap: float = 6.0, sigma: float = 0.5
                       ) -> tuple[VectorStore, np.ndarray]:
    """Two linearly separable Gaussian clusters along a random direction.

    Class "a" sits at +gap/2 along a random unit vector, class "b" at
    -gap/2; both have isotropic spread sigma.  With gap >> sigma the
    clusters are separable with a wide margin.

    Returns (store, positive): the store holds both classes, the positive
    is a fresh class-"a" sample.
    """
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    center_a = (gap / 2.0) * direction
    pts_a = center_a + rng.normal(scale=sigma, size=(n_per, dim))
    pts_b = -center_a + rng.normal(scale=sigma, size=(n_per, dim))
    matrix = np.vstack([pts_a, pts_b]).astype(np.float32)
    classes = ["a"] * n_per + ["b"] * n_per
    store = VectorStore(matrix, classes, metric=Metric.EUCLIDEAN)
    positive = (center_a + rng.normal(scale=sigma, size=dim)).astype(np.float32)
    return store, positive


# --- event log generators ----------------------------------------------------

@dataclass
class PlantedLog:
    """Event series with known task-instance positions."""

    series: EventSeries
    templates: list[EventSeries]
    ground_truth: list[list[tuple[int, int]]]  # per task: (start, length)


def _pattern(rng: np.random.Generator, length: int, dim: int,
             spread: float = 1.0) -> np.ndarray:
    """A smooth random walk pattern; distinct draws are far apart."""
    steps = rng.normal(scale=spread * 0.5, size=(length, dim))
    walk = np.cumsum(steps, axis=0)
    return (walk + rng.normal(scale=spread, size=dim)).astype(np.float64)


def planted_event_log(seed: int, n_tasks: int = 3,
                      instances_per_task: int = 24, length: int = 12,
                      dim: int = 6, jitter: float = 0.05,
                      gap_range: tuple[int, int] = (6, 18)) -> PlantedLog:
    """Noise log with task-instance copies planted at non-overlapping spots.

    Each task has a distinct template pattern; each planted instance is the
    pattern plus small jitter.  Background events are broad noise, far from
    every template.  Timestamps advance 10 ms per event.
    """
    rng = np.random.default_rng(seed)
    templates = [_pattern(rng, length, dim, spread=3.0) for _ in range(n_tasks)]

    # Build the log as alternating noise gaps and instances, tasks shuffled.
    order = np.repeat(np.arange(n_tasks), instances_per_task)
    rng.shuffle(order)
    chunks: list[np.ndarray] = []
    ground_truth: list[list[tuple[int, int]]] = [[] for _ in range(n_tasks)]
    cursor = 0

    def noise(n_events: int) -> np.ndarray:
        return rng.normal(scale=6.0, size=(n_events, dim))

    for task in order:
        gap = int(rng.integers(gap_range[0], gap_range[1] + 1))
        chunks.append(noise(gap))
        cursor += gap
        instance = templates[task] + rng.normal(scale=jitter,
                                                size=(length, dim))
        chunks.append(instance)
        ground_truth[int(task)].append((cursor, length))
        cursor += length
    chunks.append(noise(int(rng.integers(gap_range[0], gap_range[1] + 1))))

    features = np.vstack(chunks)
    timestamps = np.arange(features.shape[0], dtype=np.int64) * 10
    series = EventSeries(timestamps=timestamps, features=features)
    template_series = [
        EventSeries(timestamps=np.arange(length, dtype=np.int64) * 10,
                    features=t)
        for t in templates
    ]
    return PlantedLog(series=series, templates=template_series,
                      ground_truth=ground_truth)


def skewed_task_log(seed: int, n_true: int = 12, n_decoys: int = 2,
                    length: int = 10, dim: int = 6,
                    jitter: float = 0.02) -> PlantedLog:
    """Log where decoy instances sit closer to the template than the task.

    The true task's instances cluster tightly at mean per-event distance
    1.0 from the template; each decoy lies at distance 0.85 but the decoys
    are mutually far apart (opposite directions).  Plain ranking therefore
    admits the decoys into the top-k, while query-set expansion, having
    accepted one decoy and several true instances, pushes the remaining
    decoys down.  Ground truth lists only the true instances.
    """
    rng = np.random.default_rng(seed)
    template = _pattern(rng, length, dim, spread=3.0)

    def offset_direction() -> np.ndarray:
        v = rng.normal(size=(length, dim))
        # unit mean-per-event norm: scaling by c sets the distance to c
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        return v / norms.mean()

    dir_true = offset_direction()
    dir_decoy = offset_direction()
    true_center = template + 1.0 * dir_true
    decoy_centers = [template + 0.85 * dir_decoy,
                     template - 0.85 * dir_decoy]
    while len(decoy_centers) < n_decoys:
        decoy_centers.append(template + 0.85 * offset_direction())
    decoy_centers = decoy_centers[:n_decoys]

    blocks: list[tuple[str, np.ndarray]] = []
    blocks += [("true", true_center + rng.normal(scale=jitter,
                                                 size=(length, dim)))
               for _ in range(n_true)]
    blocks += [("decoy", c + rng.normal(scale=jitter, size=(length, dim)))
               for c in decoy_centers]
    rng.shuffle(blocks)

    chunks: list[np.ndarray] = []
    truth: list[tuple[int, int]] = []
    cursor = 0
    for kind, block in blocks:
        gap = int(rng.integers(6, 19))
        chunks.append(rng.normal(scale=6.0, size=(gap, dim)))
        cursor += gap
        chunks.append(block)
        if kind == "true":
            truth.append((cursor, length))
        cursor += length
    chunks.append(rng.normal(scale=6.0, size=(12, dim)))

    features = np.vstack(chunks)
    timestamps = np.arange(features.shape[0], dtype=np.int64) * 10
    series = EventSeries(timestamps=timestamps, features=features)
    template_series = EventSeries(
        timestamps=np.arange(length, dtype=np.int64) * 10, features=template)
    return PlantedLog(series=series, templates=[template_series],
                      ground_truth=[truth])


# --- scene generators --------------------------------------------------------

SCENE_CLASSES = ["car", "child", "bike", "ball", "player"]


def random_scene(seed: int, n_max: int = 20, m_max: int = 3,
                 dim: int = 4) -> tuple[list[SceneObject], MultiQuery]:
    """A random scene collection plus a compatible multi-object query.

    Objects spread over 1-3 scenes with random classes, embeddings,
    centroids in [0, 100]^2, and frame spans.  Query classes are sampled
    from the classes present so ClassMatch constraints stay satisfiable.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    n_scenes = int(rng.integers(1, 4))
    objects = []
    for u in range(n):
        scene = int(rng.integers(0, n_scenes))
        start = int(rng.integers(0, 50))
        objects.append(SceneObject(
            scene_id=scene,
            object_id=u,
            class_label=SCENE_CLASSES[int(rng.integers(0, len(SCENE_CLASSES)))],
            embedding=rng.normal(size=dim).astype(np.float32),
            frame_span=(start, start + int(rng.integers(5, 40))),
            centroid=(float(rng.uniform(0, 100)), float(rng.uniform(0, 100))),
        ))
    present = sorted({o.class_label for o in objects})
    query_objects = []
    for _ in range(m):
        cls = present[int(rng.integers(0, len(present)))]
        query_objects.append((cls, rng.normal(size=dim).astype(np.float32)))
    weights = rng.uniform(0.5, 2.0, size=m)
    return objects, MultiQuery(objects=query_objects, weights=weights)


def random_constraints(seed: int, m: int) -> list[Constraint]:
    """A random mixed constraint set for an m-object query."""
    rng = np.random.default_rng(seed)
    constraints: list[Constraint] = []
    for i in range(m):
        if rng.random() < 0.5:
            constraints.append(ClassMatch(i=i))
    if rng.random() < 0.4:
        constraints.append(SameScene())
    if rng.random() < 0.3:
        constraints.append(TemporalOverlap())
    if m >= 2:
        if rng.random() < 0.4:
            i, j = rng.choice(m, size=2, replace=False)
            constraints.append(NextTo(i=int(i), j=int(j),
                                      max_dist=float(rng.uniform(10, 60))))
        if rng.random() < 0.3:
            i, j = rng.choice(m, size=2, replace=False)
            constraints.append(AngleOnTop(i=int(i), j=int(j), lo_deg=0.0,
                                          hi_deg=float(rng.uniform(20, 180))))
    return constraints


def planted_triple_scene(seed: int, n_extra: int = 30
                         ) -> tuple[list[SceneObject], MultiQuery]:
    """Scene with exactly one (child on-top-of bike) next-to car triple.

    The planted child sits directly above the planted bike (angle 0 from
    vertical-up) and the bike within 10 px of the planted car.  Extra
    objects share the classes but are scattered far apart, so no other
    tuple satisfies both spatial constraints.
    """
    rng = np.random.default_rng(seed)
    dim = 4
    objects = [
        SceneObject(scene_id=0, object_id=0, class_label="child",
                    embedding=rng.normal(size=dim).astype(np.float32),
                    frame_span=(0, 100), centroid=(50.0, 40.0)),
        SceneObject(scene_id=0, object_id=1, class_label="bike",
                    embedding=rng.normal(size=dim).astype(np.float32),
                    frame_span=(0, 100), centroid=(50.0, 48.0)),
        SceneObject(scene_id=0, object_id=2, class_label="car",
                    embedding=rng.normal(size=dim).astype(np.float32),
                    frame_span=(0, 100), centroid=(57.0, 49.0)),
    ]
    # Scattered extras on a coarse lattice, pairwise >100 px apart.
    for i in range(n_extra):
        cls = SCENE_CLASSES[int(rng.integers(0, len(SCENE_CLASSES)))]
        cx = 200.0 + 150.0 * (i % 8)
        cy = 200.0 + 150.0 * (i // 8)
        objects.append(SceneObject(
            scene_id=0, object_id=3 + i, class_label=cls,
            embedding=rng.normal(size=dim).astype(np.float32),
            frame_span=(0, 100), centroid=(cx, cy)))
    query = MultiQuery(objects=[
        ("child", rng.normal(size=dim).astype(np.float32)),
        ("bike", rng.normal(size=dim).astype(np.float32)),
        ("car", rng.normal(size=dim).astype(np.float32)),
    ])
    return objects, query


@dataclass
class TrajectoryFrames:
    """Per-frame object snapshots of slowly drifting scene objects."""

    frames: list[list[SceneObject]] = field(default_factory=list)
    query: MultiQuery | None = None


def trajectory_frames(seed: int, n_objects: int = 10, n_frames: int = 40,
                      dim: int = 4, drift: float = 0.01,
                      teleport_at: int | None = None) -> TrajectoryFrames:
    """Slow linear trajectories sampled as one object list per frame.

    Embeddings drift by `drift` per frame along a fixed direction; object
    identity (uid order) is stable across frames, so an alignment found in
    one frame stays meaningful in the next.  With teleport_at set, object 0
    jumps to a far position and embedding at that frame.
    """
    rng = np.random.default_rng(seed)
    classes = [SCENE_CLASSES[int(rng.integers(0, len(SCENE_CLASSES)))]
               for _ in range(n_objects)]
    base_emb = rng.normal(size=(n_objects, dim))
    emb_dir = rng.normal(size=(n_objects, dim))
    emb_dir /= np.linalg.norm(emb_dir, axis=1, keepdims=True)
    base_pos = rng.uniform(0, 100, size=(n_objects, 2))
    velocity = rng.uniform(-0.5, 0.5, size=(n_objects, 2))

    frames: list[list[SceneObject]] = []
    for t in range(n_frames):
        objs = []
        for u in range(n_objects):
            emb = base_emb[u] + drift * t * emb_dir[u]
            pos = base_pos[u] + velocity[u] * t
            if teleport_at is not None and u == 0 and t >= teleport_at:
                emb = emb + 50.0
                pos = pos + 500.0
            objs.append(SceneObject(
                scene_id=0, object_id=u, class_label=classes[u],
                embedding=emb.astype(np.float32),
                frame_span=(t, t + 1),
                centroid=(float(pos[0]), float(pos[1]))))
        frames.append(objs)

    m = 2
    # Query each position with the class of a distinct object, embeddings
    # near those objects' starting points so argmins are stable.
    picks = rng.choice(n_objects, size=m, replace=False)
    query_objects = [(classes[u],
                      (base_emb[u] + rng.normal(scale=0.05, size=dim)
                       ).astype(np.float32))
                     for u in picks]
    return TrajectoryFrames(frames=frames,
                            query=MultiQuery(objects=query_objects))


# --- planner generators ------------------------------------------------------

def metadata_store(seed: int, n: int = 200, dim: int = 4) -> VectorStore:
    """Random store with class labels and a numeric "size" metadata field."""
    rng = np.random.default_rng(seed)
    matrix = rng.normal(size=(n, dim)).astype(np.float32)
    classes = [("a", "b", "c")[int(rng.integers(0, 3))] for _ in range(n)]
    metadata = [{"size": float(rng.uniform(0, 10))} for _ in range(n)]
    return VectorStore(matrix, classes, metadata, metric=Metric.EUCLIDEAN)


def two_escalation_store(k: int = 5, n: int = 100,
                         dim: int = 2) -> tuple[VectorStore, np.ndarray, list[int]]:
    """Store where PostFilter(alpha=2) needs exactly two escalations.

    Items sit on a line at increasing distance from the query; the
    predicate-passing items are planted at ranks 15, 16, 35, 36, 37, so
    with k=5 the fetches go 10 -> 20 -> 40 candidates before 5 survive.

    Returns (store, query, passing_ids).
    """
    matrix = np.zeros((n, dim), dtype=np.float32)
    matrix[:, 0] = np.arange(n, dtype=np.float32)
    passing = [15, 16, 35, 36, 37]
    classes = ["pass" if i in passing else "fail" for i in range(n)]
    store = VectorStore(matrix, classes, metric=Metric.EUCLIDEAN)
    query = np.zeros(dim, dtype=np.float32)
    return store, query, passing
