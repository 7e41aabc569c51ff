"""Tetrahedral meshes: containers, file I/O, beam generator and scenarios.

Positions are stored as ``(n, 3)`` float arrays and connectivity as
``(m, 4)`` integer arrays. Every loaded or generated mesh has positively
oriented rest elements.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for unreadable, malformed or degenerate meshes."""


class ScenarioError(ValueError):
    """Raised for invalid scenario specifications."""


def _signed_volumes(x: np.ndarray, tets: np.ndarray) -> np.ndarray:
    e = x[tets[:, 1:]] - x[tets[:, :1]]
    return np.linalg.det(e.transpose(0, 2, 1)) / 6.0


@dataclass
class TetMesh:
    rest_positions: np.ndarray
    tets: np.ndarray
    fixed_vertices: tuple = ()

    def __post_init__(self):
        self.rest_positions = np.ascontiguousarray(self.rest_positions, dtype=np.float64).reshape(-1, 3)
        self.tets = np.ascontiguousarray(self.tets, dtype=np.int64).reshape(-1, 4)
        n = len(self.rest_positions)
        if self.tets.size:
            if self.tets.min() < 0 or self.tets.max() >= n:
                raise MeshError(f"tet index out of range for {n} vertices")
            srt = np.sort(self.tets, axis=1)
            bad = np.nonzero((srt[:, 1:] == srt[:, :-1]).any(axis=1))[0]
            if bad.size:
                raise MeshError(f"tet {bad[0]} repeats a vertex")
        fixed = tuple(int(i) for i in self.fixed_vertices)
        if len(set(fixed)) != len(fixed):
            raise MeshError("duplicate fixed vertex")
        if any(i < 0 or i >= n for i in fixed):
            raise MeshError("fixed vertex out of range")
        self.fixed_vertices = fixed

    @property
    def n_vertices(self) -> int:
        return len(self.rest_positions)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    def bbox_diagonal(self) -> float:
        x = self.rest_positions
        return float(np.linalg.norm(x.max(axis=0) - x.min(axis=0))) if len(x) else 0.0


def _oriented(x: np.ndarray, tets: np.ndarray) -> np.ndarray:
    """Swap two indices of negatively oriented tets; reject degenerate ones."""
    tets = np.array(tets, dtype=np.int64).reshape(-1, 4)
    vol = _signed_volumes(x, tets)
    h = float(np.linalg.norm(x.max(axis=0) - x.min(axis=0))) if len(x) else 0.0
    tiny = 1e-12 * h**3
    degenerate = np.nonzero(np.abs(vol) <= tiny)[0]
    if degenerate.size:
        raise MeshError(f"degenerate rest tet {degenerate[0]} (|volume| <= {tiny:g})")
    flip = vol < 0
    tets[flip, 2], tets[flip, 3] = tets[flip, 3].copy(), tets[flip, 2].copy()
    return tets


@dataclass
class RestData:
    dm_inv: np.ndarray
    volume: np.ndarray

    def __getitem__(self, i):
        return RestData(self.dm_inv[i], self.volume[i])


def precompute_rest(mesh: TetMesh) -> RestData:
    """Inverse rest-shape matrices and rest volumes for every element."""
    x = mesh.rest_positions
    dm = (x[mesh.tets[:, 1:]] - x[mesh.tets[:, :1]]).transpose(0, 2, 1)
    det = np.linalg.det(dm)
    h = mesh.bbox_diagonal()
    bad = np.nonzero(np.abs(det) <= 1e-12 * h**3)[0]
    if bad.size:
        raise MeshError(f"degenerate element {bad[0]}: det(Dm) = {det[bad[0]]:g}")
    return RestData(np.linalg.inv(dm), det / 6.0)


def generate_beam(divisions, extent=(1.0, 1.0, 1.0)) -> TetMesh:
    """Axis-aligned box split into hexahedral cells of six tets each.

    All cells share the main diagonal from their low corner to their high
    corner, so the subdivision is conforming and reproducible.
    """
    nx, ny, nz = (int(d) for d in divisions)
    if min(nx, ny, nz) < 1:
        raise MeshError(f"divisions must be >= 1, got {tuple(divisions)}")
    ex, ey, ez = (float(e) for e in extent)
    if min(ex, ey, ez) <= 0:
        raise MeshError(f"extent must be positive, got {tuple(extent)}")

    gx, gy, gz = np.meshgrid(
        np.linspace(0.0, ex, nx + 1),
        np.linspace(0.0, ey, ny + 1),
        np.linspace(0.0, ez, nz + 1),
        indexing="ij",
    )
    x = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    def vid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    c = [vid(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1)) for b in range(8)]
    # six tets around the 0-7 diagonal, one per monotone corner path
    paths = [(1, 3), (1, 5), (2, 3), (2, 6), (4, 5), (4, 6)]
    tets = np.concatenate(
        [np.stack([c[0], c[a], c[b], c[7]], axis=1) for a, b in paths], axis=0
    )
    tets = tets.reshape(6, -1, 4).transpose(1, 0, 2).reshape(-1, 4)
    return TetMesh(x, _oriented(x, tets))


# --------------------------------------------------------------------- I/O


def _data_lines(path: Path):
    try:
        text = path.read_text()
    except OSError as exc:
        raise MeshError(f"cannot read {path}: {exc}") from exc
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def _load_tetgen(path: Path):
    base = path.with_suffix("") if path.suffix in (".node", ".ele") else path
    node, ele = base.with_suffix(".node"), base.with_suffix(".ele")
    try:
        lines = list(_data_lines(node))
        n, dim = (int(v) for v in lines[0].split()[:2])
        if dim != 3:
            raise MeshError(f"{node}: expected 3-D nodes, got dim={dim}")
        rows = [ln.split() for ln in lines[1 : 1 + n]]
        if len(rows) != n:
            raise MeshError(f"{node}: expected {n} nodes, found {len(rows)}")
        ids = np.array([int(r[0]) for r in rows])
        x = np.array([[float(v) for v in r[1:4]] for r in rows])
        base_index = int(ids[0]) if n else 0
        if base_index not in (0, 1):
            raise MeshError(f"{node}: first node index must be 0 or 1, got {base_index}")

        lines = list(_data_lines(ele))
        m, per = (int(v) for v in lines[0].split()[:2])
        if per != 4:
            raise MeshError(f"{ele}: only linear tets supported, got {per} nodes per element")
        rows = [ln.split() for ln in lines[1 : 1 + m]]
        if len(rows) != m:
            raise MeshError(f"{ele}: expected {m} elements, found {len(rows)}")
        tets = np.array([[int(v) for v in r[1:5]] for r in rows], dtype=np.int64) - base_index
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"garbled tetgen file near {base}: {exc}") from exc
    if tets.size and (tets.min() < 0 or tets.max() >= len(x)):
        raise MeshError(f"{ele}: vertex index out of range for {len(x)} nodes")
    return x, tets


def _load_msh(path: Path):
    lines = list(_data_lines(path))
    try:
        if "$MeshFormat" in lines:
            fmt = lines[lines.index("$MeshFormat") + 1].split()
            if not fmt[0].startswith("2") or fmt[1] != "0":
                raise MeshError(f"{path}: only MSH v2 ASCII is supported")
        s = lines.index("$Nodes")
        n = int(lines[s + 1])
        ids, x = [], []
        for ln in lines[s + 2 : s + 2 + n]:
            r = ln.split()
            ids.append(int(r[0]))
            x.append([float(v) for v in r[1:4]])
        remap = {nid: k for k, nid in enumerate(ids)}
        s = lines.index("$Elements")
        m = int(lines[s + 1])
        tets = []
        for ln in lines[s + 2 : s + 2 + m]:
            r = [int(v) for v in ln.split()]
            if r[1] != 4:
                continue
            ntags = r[2]
            tets.append([remap[v] for v in r[3 + ntags : 7 + ntags]])
    except MeshError:
        raise
    except (ValueError, IndexError, KeyError) as exc:
        raise MeshError(f"garbled msh file {path}: {exc}") from exc
    return np.array(x, dtype=np.float64).reshape(-1, 3), np.array(tets, dtype=np.int64).reshape(-1, 4)


def load_mesh(path, format: str = "tetgen", fixed_vertices=()) -> TetMesh:
    """Read a TetGen ``.node``/``.ele`` pair or an MSH v2 ASCII file."""
    path = Path(path)
    if format == "tetgen":
        x, tets = _load_tetgen(path)
    elif format == "msh":
        x, tets = _load_msh(path)
    elif format == "vtk":
        x, tets = read_vtk(path)
    else:
        raise MeshError(f"unknown mesh format {format!r}")
    if not len(tets):
        raise MeshError(f"{path}: no tetrahedra")
    return TetMesh(x, _oriented(x, tets), fixed_vertices)


def write_tetgen(mesh: TetMesh, prefix) -> tuple[Path, Path]:
    """Write ``prefix.node`` and ``prefix.ele`` (0-based)."""
    prefix = Path(prefix)
    node, ele = prefix.with_suffix(".node"), prefix.with_suffix(".ele")
    with open(node, "w") as fh:
        fh.write(f"{mesh.n_vertices} 3 0 0\n")
        for i, p in enumerate(mesh.rest_positions):
            fh.write(f"{i} {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
    with open(ele, "w") as fh:
        fh.write(f"{mesh.n_tets} 4 0\n")
        for i, t in enumerate(mesh.tets):
            fh.write(f"{i} {t[0]} {t[1]} {t[2]} {t[3]}\n")
    return node, ele


def export_vtk(mesh: TetMesh, positions, path) -> None:
    """Write a legacy ASCII VTK unstructured grid of tetrahedra."""
    x = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if len(x) != mesh.n_vertices:
        raise MeshError(f"expected {mesh.n_vertices} positions, got {len(x)}")
    if not mesh.n_tets:
        raise MeshError("cannot export a mesh without tetrahedra")
    out = [
        "# vtk DataFile Version 2.0",
        "trnewton tet mesh",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(x)} double",
    ]
    out += [f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}" for p in x]
    out.append(f"CELLS {mesh.n_tets} {5 * mesh.n_tets}")
    out += [f"4 {t[0]} {t[1]} {t[2]} {t[3]}" for t in mesh.tets]
    out.append(f"CELL_TYPES {mesh.n_tets}")
    out += ["10"] * mesh.n_tets
    Path(path).write_text("\n".join(out) + "\n")


def read_vtk(path):
    """Read back points and tetrahedra written by :func:`export_vtk`."""
    tokens = Path(path).read_text().split()
    try:
        i = tokens.index("POINTS")
        n = int(tokens[i + 1])
        x = np.array(tokens[i + 3 : i + 3 + 3 * n], dtype=np.float64).reshape(n, 3)
        i = tokens.index("CELLS")
        m = int(tokens[i + 1])
        cells = np.array(tokens[i + 3 : i + 3 + 5 * m], dtype=np.int64).reshape(m, 5)
    except (ValueError, IndexError) as exc:
        raise MeshError(f"garbled vtk file {path}: {exc}") from exc
    if (cells[:, 0] != 4).any():
        raise MeshError(f"{path}: non-tetrahedral cell")
    return x, cells[:, 1:]


# --------------------------------------------------------------- scenarios

SCENARIO_KINDS = ("stretch", "compress", "bend", "twist", "identity")


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str = "identity"
    magnitude: float = 1.0
    axis: tuple = (0.0, 0.0, 1.0)
    fixed_region: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ScenarioError(f"unknown scenario kind {self.kind!r}")
        if self.kind in ("stretch", "compress") and not self.magnitude > 0:
            raise ScenarioError(f"{self.kind} magnitude must be > 0")
        a = np.asarray(self.axis, dtype=float)
        if a.shape != (3,) or not np.linalg.norm(a) > 0:
            raise ScenarioError(f"bad axis {self.axis}")
        object.__setattr__(self, "axis", tuple(float(v) for v in a / np.linalg.norm(a)))
        lo, hi = (float(f) for f in self.fixed_region)
        if not (0.0 <= lo < 0.5 and 0.0 <= hi < 0.5):
            raise ScenarioError(f"fixed_region fractions must lie in [0, 0.5), got {self.fixed_region}")
        object.__setattr__(self, "fixed_region", (lo, hi))


def _frame(axis):
    a = np.asarray(axis, dtype=float)
    helper = np.eye(3)[np.argmin(np.abs(a))]
    d = np.cross(a, helper)
    d /= np.linalg.norm(d)
    return a, d, np.cross(a, d)


def apply_scenario(mesh: TetMesh, spec: ScenarioSpec, fixed_vertices=None):
    """Initial positions and pinned vertex indices for a deformation scenario.

    The axial coordinate ``t`` runs from 0 to 1 along ``spec.axis``; vertices
    with ``t`` inside either end slab are pinned at their transformed
    location. Passing ``fixed_vertices`` overrides the slab selection.
    """
    x = mesh.rest_positions
    axis, d1, d2 = _frame(spec.axis)
    s = x @ axis
    s0, s1 = s.min(), s.max()
    length = s1 - s0
    if length <= 0:
        raise ScenarioError("mesh has zero extent along the scenario axis")
    t = (s - s0) / length
    # axis line through the cross-section bounding-box center
    q1, q2 = x @ d1, x @ d2
    c1 = 0.5 * (q1.min() + q1.max())
    c2 = 0.5 * (q2.min() + q2.max())
    r1, r2 = q1 - c1, q2 - c2

    kind, mag = spec.kind, float(spec.magnitude)
    if kind == "identity":
        y = x.copy()
    elif kind in ("stretch", "compress"):
        y = x + np.outer((mag - 1.0) * (s - 0.5 * (s0 + s1)), axis)
    elif kind == "twist":
        th = mag * t
        c, sn = np.cos(th), np.sin(th)
        y = (
            np.outer(s, axis)
            + np.outer(c1 + c * r1 - sn * r2, d1)
            + np.outer(c2 + sn * r1 + c * r2, d2)
        )
    elif kind == "bend":
        if mag == 0.0:
            y = x.copy()
        else:
            radius = length / mag
            phi = mag * t
            c, sn = np.cos(phi), np.sin(phi)
            along = s0 + radius * sn - r1 * sn
            across = c1 + radius * (1.0 - c) + r1 * c
            y = np.outer(along, axis) + np.outer(across, d1) + np.outer(q2, d2)
    else:  # pragma: no cover - guarded by ScenarioSpec
        raise ScenarioError(kind)

    if fixed_vertices is None:
        tol = 1e-9
        lo, hi = spec.fixed_region
        start = np.nonzero(t <= lo + tol)[0]
        end = np.nonzero(t >= 1.0 - hi - tol)[0]
        if not len(start) or not len(end):
            raise ScenarioError("fixed region selects no vertices at one end")
        fixed = np.union1d(start, end)
    else:
        fixed = np.unique(np.asarray(list(fixed_vertices), dtype=np.int64))
        if not len(fixed):
            raise ScenarioError("explicit fixed vertex list is empty")
    return np.ascontiguousarray(y), tuple(int(i) for i in fixed)
