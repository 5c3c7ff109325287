"""Meshes of the plate domain and classification of its boundary.

Only the square (-1, 1)^2 is generated natively.  Arbitrary polygonal meshes
can be read from a small plain-text format, see :func:`read_mesh`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidLevel, MeshFormatError, NoClampedEdge

log = logging.getLogger(__name__)

MAX_LEVEL = 14
SIDES = ("west", "north", "east", "south")
TAG_NAMES = {
    "c": "c", "clamped": "c",
    "s": "s", "simply_supported": "s", "simply-supported": "s", "simply": "s",
    "f": "f", "free": "f",
}
# the numerical experiment: clamped west, free east, simply supported north/south
DEFAULT_TAGS = {"west": "c", "north": "s", "east": "f", "south": "s"}


def normalize_tag(tag: str) -> str:
    try:
        return TAG_NAMES[tag.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown boundary tag {tag!r}") from None


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangle or quadrilateral mesh.

    ``boundary_edges[i] = (a, b)`` is ordered as in the owning element, so the
    domain lies to the left of a -> b.  ``boundary_local[i]`` is the local
    edge index in the owner, local edge ``j`` joining local vertices ``j`` and
    ``j + 1``.
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_edges: np.ndarray
    boundary_owner: np.ndarray
    boundary_local: np.ndarray
    level: int = 0
    boundary_tags: np.ndarray | None = None
    boundary_sides: np.ndarray | None = None
    cells_per_side: int | None = None

    @property
    def kind(self) -> str:
        return "triangle" if self.elements.shape[1] == 3 else "quad"

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def h(self) -> float:
        if self.cells_per_side is not None:
            return 2.0 / self.cells_per_side
        return float(self.edge_lengths().max())

    def edge_lengths(self) -> np.ndarray:
        x = self.nodes[self.elements]
        return np.linalg.norm(np.roll(x, -1, axis=1) - x, axis=2)

    def element_areas(self) -> np.ndarray:
        """Signed areas (shoelace); positive for counterclockwise elements."""
        x = self.nodes[self.elements]
        xn = np.roll(x, -1, axis=1)
        return 0.5 * np.sum(x[..., 0] * xn[..., 1] - xn[..., 0] * x[..., 1], axis=1)

    def boundary_lengths(self) -> np.ndarray:
        p = self.nodes[self.boundary_edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Owning element of each point; structured square meshes only."""
        if self.cells_per_side is None:
            raise NotImplementedError("point location needs a structured square mesh")
        n = self.cells_per_side
        h = 2.0 / n
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        ix = np.clip(np.floor((pts[:, 0] + 1.0) / h).astype(int), 0, n - 1)
        iy = np.clip(np.floor((pts[:, 1] + 1.0) / h).astype(int), 0, n - 1)
        cell = iy * n + ix
        if self.kind == "quad":
            return cell
        lx = (pts[:, 0] + 1.0) / h - ix
        ly = (pts[:, 1] + 1.0) / h - iy
        return 2 * cell + (ly > lx).astype(int)


def _boundary_of(elements: np.ndarray):
    nv = elements.shape[1]
    a = elements
    b = np.roll(elements, -1, axis=1)
    pairs = np.stack([a, b], axis=2).reshape(-1, 2)
    owner = np.repeat(np.arange(len(elements)), nv)
    local = np.tile(np.arange(nv), len(elements))
    key = np.sort(pairs, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    on_boundary = counts[inv] == 1
    return pairs[on_boundary], owner[on_boundary], local[on_boundary]


def build_square_mesh(level: int, kind: str = "triangle") -> Mesh:
    """Uniform 2^level x 2^level grid on (-1, 1)^2.

    With ``kind="triangle"`` each cell is cut along its lower-left to
    upper-right diagonal.
    """
    if not isinstance(level, (int, np.integer)) or level < 0 or level > MAX_LEVEL:
        raise InvalidLevel(f"level must be an integer in [0, {MAX_LEVEL}], got {level!r}")
    if kind not in ("triangle", "quad"):
        raise ValueError(f"kind must be 'triangle' or 'quad', got {kind!r}")
    n = 2 ** int(level)
    t = np.linspace(-1.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    v00 = (j * (n + 1) + i).ravel()
    v10, v01 = v00 + 1, v00 + n + 1
    v11 = v01 + 1
    if kind == "quad":
        elements = np.column_stack([v00, v10, v11, v01])
    else:
        lower = np.column_stack([v00, v10, v11])
        upper = np.column_stack([v00, v11, v01])
        elements = np.stack([lower, upper], axis=1).reshape(-1, 3)
    edges, owner, local = _boundary_of(elements)

    mid = nodes[edges].mean(axis=1)
    sides = np.empty(len(edges), dtype=object)
    sides[np.isclose(mid[:, 0], -1.0)] = "west"
    sides[np.isclose(mid[:, 0], 1.0)] = "east"
    sides[np.isclose(mid[:, 1], -1.0)] = "south"
    sides[np.isclose(mid[:, 1], 1.0)] = "north"
    return Mesh(nodes, elements, edges, owner, local, level=int(level),
                boundary_sides=sides, cells_per_side=n)


# ---------------------------------------------------------------------------
# boundary partition


@dataclass(frozen=True)
class DomainEdge:
    tag: str
    start: np.ndarray
    end: np.ndarray
    sigma_start: float
    length: float
    tangent: np.ndarray
    normal: np.ndarray
    mesh_edges: tuple  # positions in the ordered boundary edge list


@dataclass(frozen=True)
class Corner:
    """Corner ``i`` is the start point of domain edge ``i``."""

    point: np.ndarray
    incoming: int
    outgoing: int
    tags: tuple  # (tag of incoming edge, tag of outgoing edge)


@dataclass(frozen=True, eq=False)
class BoundaryPartition:
    """Boundary conditions and counterclockwise arclength of the domain boundary.

    Ordered boundary mesh edges start at x_B, the counterclockwise end point of
    the fixed clamped edge E, and run counterclockwise, so E comes last and
    ``gamma(0) = x_B``.
    """

    mesh: Mesh
    order: np.ndarray
    domain_edge_of: np.ndarray
    domain_edges: tuple
    corners: tuple
    free_components: tuple
    sigma: np.ndarray = field(repr=False)
    fixed_edge: int = -1

    @property
    def edge_tags(self) -> tuple:
        return tuple(e.tag for e in self.domain_edges)

    @property
    def mesh_edge_tags(self) -> np.ndarray:
        tags = np.array(self.edge_tags, dtype=object)
        return tags[self.domain_edge_of]

    @property
    def perimeter(self) -> float:
        return float(self.sigma[-1])

    @property
    def sigma_E(self) -> float:
        return self.domain_edges[self.fixed_edge].sigma_start

    @property
    def x_A(self) -> np.ndarray:
        return self.domain_edges[self.fixed_edge].start

    @property
    def x_B(self) -> np.ndarray:
        return self.domain_edges[self.fixed_edge].end

    @property
    def free_corners(self) -> tuple:
        """Corners whose two adjacent domain edges are both free."""
        return tuple(i for i, c in enumerate(self.corners) if c.tags == ("f", "f"))

    def edges(self) -> np.ndarray:
        """Ordered boundary mesh edges as node pairs."""
        return self.mesh.boundary_edges[self.order]

    def component_of(self, domain_edge: int) -> int | None:
        for i, comp in enumerate(self.free_components):
            if domain_edge in comp:
                return i
        return None

    def has_tag(self, tag: str) -> bool:
        return tag in self.edge_tags

    def gamma(self, sigma) -> np.ndarray:
        """Boundary point at arclength ``sigma`` (taken modulo the perimeter)."""
        s = np.mod(np.asarray(sigma, dtype=float), self.perimeter)
        idx = np.clip(np.searchsorted(self.sigma, s, side="right") - 1, 0, len(self.order) - 1)
        p = self.mesh.nodes[self.edges()]
        lengths = np.diff(self.sigma)
        lam = (s - self.sigma[idx]) / lengths[idx]
        return p[idx, 0] + lam[..., None] * (p[idx, 1] - p[idx, 0])


def _chain(mesh: Mesh) -> np.ndarray:
    edges = mesh.boundary_edges
    nxt = {int(a): k for k, (a, _) in enumerate(edges)}
    if len(nxt) != len(edges):
        raise MeshFormatError("boundary is not a simple closed curve")
    order = [0]
    while True:
        k = nxt.get(int(edges[order[-1], 1]))
        if k is None:
            raise MeshFormatError("boundary is not closed")
        if k == 0:
            break
        order.append(k)
    if len(order) != len(edges):
        raise MeshFormatError("boundary has several components; only simply connected domains are supported")
    return np.asarray(order)


def partition_from_tags(mesh: Mesh, tags: Sequence[str]) -> BoundaryPartition:
    """Build the partition from one tag per mesh boundary edge."""
    tags = np.array([normalize_tag(t) for t in tags], dtype=object)
    if len(tags) != len(mesh.boundary_edges):
        raise MeshFormatError("need one tag per boundary edge")
    if "c" not in set(tags):
        raise NoClampedEdge("at least one boundary edge must be clamped")

    chain = _chain(mesh)
    p = mesh.nodes[mesh.boundary_edges[chain]]
    d = p[:, 1] - p[:, 0]
    tang = d / np.linalg.norm(d, axis=1)[:, None]
    prev = np.roll(np.arange(len(chain)), 1)
    cross = tang[prev, 0] * tang[:, 1] - tang[prev, 1] * tang[:, 0]
    dot = np.sum(tang[prev] * tang, axis=1)
    ctags = tags[chain]
    breaks = (np.abs(cross) > 1e-10) | (dot < 0) | (ctags[prev] != ctags)
    starts = np.flatnonzero(breaks)
    if len(starts) == 0:
        raise MeshFormatError("boundary has no corners")

    nb = len(chain)
    runs = []
    for i, s in enumerate(starts):
        count = (starts[(i + 1) % len(starts)] - s) % nb or nb
        runs.append((s + np.arange(count)) % nb)
    run_tags = [ctags[r[0]] for r in runs]
    for r, t in zip(runs, run_tags):
        if np.any(ctags[r] != t):
            raise MeshFormatError("inconsistent tags within a domain edge")

    # fixed edge E: clamped run with the smallest midpoint (x, then y)
    def midpoint(r):
        return 0.5 * (p[r[0], 0] + p[r[-1], 1])

    clamped = [i for i, t in enumerate(run_tags) if t == "c"]
    fixed = min(clamped, key=lambda i: (round(midpoint(runs[i])[0], 12), round(midpoint(runs[i])[1], 12)))
    # rotate so that E is last: the list then starts at x_B
    rot = [(fixed + 1 + i) % len(runs) for i in range(len(runs))]
    runs = [runs[i] for i in rot]
    run_tags = [run_tags[i] for i in rot]

    order = np.concatenate([chain[r] for r in runs])
    lengths = mesh.boundary_lengths()[order]
    sigma = np.concatenate([[0.0], np.cumsum(lengths)])
    domain_edge_of = np.concatenate([np.full(len(r), i) for i, r in enumerate(runs)])

    domain_edges = []
    pos = 0
    for i, r in enumerate(runs):
        idx = tuple(range(pos, pos + len(r)))
        start = mesh.nodes[mesh.boundary_edges[order[idx[0]], 0]]
        end = mesh.nodes[mesh.boundary_edges[order[idx[-1]], 1]]
        length = float(sigma[idx[-1] + 1] - sigma[idx[0]])
        t = (end - start) / np.linalg.norm(end - start)
        n = np.array([t[1], -t[0]])
        domain_edges.append(DomainEdge(run_tags[i], start, end, float(sigma[idx[0]]),
                                       length, t, n, idx))
        pos += len(r)

    m = len(domain_edges)
    corners = tuple(
        Corner(domain_edges[i].start, (i - 1) % m, i, (domain_edges[(i - 1) % m].tag, domain_edges[i].tag))
        for i in range(m)
    )

    # maximal cyclic runs of free domain edges
    comps = []
    seen = set()
    for i in range(m):
        if domain_edges[i].tag != "f" or i in seen or domain_edges[(i - 1) % m].tag == "f":
            continue
        comp = []
        j = i
        while domain_edges[j].tag == "f":
            comp.append(j)
            seen.add(j)
            j = (j + 1) % m
        comps.append(tuple(comp))

    return BoundaryPartition(mesh, order, domain_edge_of, tuple(domain_edges), corners,
                             tuple(comps), sigma, fixed_edge=m - 1)


def classify_boundary(mesh: Mesh, spec: Mapping[str, str] | None = None) -> BoundaryPartition:
    """Tag the four sides of a square mesh, e.g. ``{"west": "c", "east": "f", ...}``."""
    spec = dict(DEFAULT_TAGS if spec is None else spec)
    if mesh.boundary_sides is None:
        raise ValueError("side tags need a mesh from build_square_mesh; use partition_from_tags")
    missing = set(SIDES) - set(spec)
    if missing:
        raise ValueError(f"missing side tags: {sorted(missing)}")
    side_tag = {s: normalize_tag(spec[s]) for s in SIDES}
    if "c" not in side_tag.values():
        raise NoClampedEdge("at least one side must be clamped")
    tags = [side_tag[s] for s in mesh.boundary_sides]
    return partition_from_tags(mesh, tags)


# ---------------------------------------------------------------------------
# plain-text mesh files


def write_mesh(path, mesh: Mesh, partition: BoundaryPartition | None = None) -> None:
    if partition is not None:
        tags = np.empty(len(mesh.boundary_edges), dtype=object)
        tags[partition.order] = partition.mesh_edge_tags
    elif mesh.boundary_tags is not None:
        tags = mesh.boundary_tags
    else:
        raise ValueError("boundary tags unknown; pass a partition")
    with open(path, "w") as fh:
        fh.write(f"nodes {mesh.n_nodes} elements {mesh.n_elements} boundary {len(mesh.boundary_edges)}\n")
        for x, y in mesh.nodes:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for el in mesh.elements:
            fh.write(" ".join(str(int(v)) for v in el) + "\n")
        for (a, b), t in zip(mesh.boundary_edges, tags):
            fh.write(f"{int(a)} {int(b)} {t}\n")


def read_mesh(path) -> Mesh:
    """Read the format written by :func:`write_mesh`.

    Element orientation is repaired to counterclockwise.  Angles between edges
    with equal tags are not checked; collinear runs are merged into one domain
    edge by :func:`partition_from_tags`.
    """
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        head = lines[0]
        if head[0] != "nodes" or head[2] != "elements" or head[4] != "boundary":
            raise ValueError
        n, m, b = int(head[1]), int(head[3]), int(head[5])
        nodes = np.array([[float(v) for v in ln[:2]] for ln in lines[1:1 + n]])
        elements = np.array([[int(v) for v in ln] for ln in lines[1 + n:1 + n + m]])
        brows = lines[1 + n + m:1 + n + m + b]
        bpairs = [(int(ln[0]), int(ln[1])) for ln in brows]
        btags = [normalize_tag(ln[2]) for ln in brows]
    except (ValueError, IndexError) as exc:
        raise MeshFormatError(f"malformed mesh file {path}: {exc}") from exc
    if nodes.shape != (n, 2) or elements.ndim != 2 or elements.shape[1] not in (3, 4) or len(bpairs) != b:
        raise MeshFormatError(f"malformed mesh file {path}")

    x = nodes[elements]
    xn = np.roll(x, -1, axis=1)
    area = 0.5 * np.sum(x[..., 0] * xn[..., 1] - xn[..., 0] * x[..., 1], axis=1)
    if np.any(area == 0):
        raise MeshFormatError("degenerate element")
    elements = elements.copy()
    elements[area < 0] = elements[area < 0][:, ::-1]

    edges, owner, local = _boundary_of(elements)
    lookup = {frozenset(map(int, e)): k for k, e in enumerate(edges)}
    tags = np.empty(len(edges), dtype=object)
    for (i, j), t in zip(bpairs, btags):
        k = lookup.get(frozenset((i, j)))
        if k is None:
            raise MeshFormatError(f"({i}, {j}) is not a boundary edge")
        tags[k] = t
    if any(t is None for t in tags):
        raise MeshFormatError("some boundary edges carry no tag")
    return Mesh(nodes, elements, edges, owner, local, level=0, boundary_tags=tags)
