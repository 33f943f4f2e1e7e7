"""Triangle meshes and the MSH 2.2 ASCII subset used to exchange them.

Supported sections: ``$MeshFormat``, ``$PhysicalNames`` (optional),
``$Nodes`` and ``$Elements``.  Element type 1 (2-node line) becomes a tagged
boundary edge, type 2 (3-node triangle) a triangle, type 15 (1-node point)
is skipped; anything else is rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import MeshParseError

DEGENERATE_AREA = 1e-12
_SUPPORTED = {1: 2, 2: 3, 15: 1}


@dataclass
class TriangleMesh:
    nodes: np.ndarray                 # (n, 2) mm
    triangles: np.ndarray             # (m, 3) int64, counter-clockwise
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    edge_tags: list = field(default_factory=list)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.float64).reshape(-1, 2)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.edge_tags = list(self.edge_tags)
        n = len(self.nodes)
        for name, idx in (("triangle", self.triangles), ("edge", self.edges)):
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise ValueError(f"{name} node index out of range [0, {n})")
        if len(self.edge_tags) != len(self.edges):
            raise ValueError("one tag per boundary edge is required")
        a = self.signed_areas()
        flip = a < 0
        if flip.any():
            self.triangles[flip] = self.triangles[flip][:, [0, 2, 1]]

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    @property
    def area(self) -> float:
        return float(self.signed_areas().sum())

    def degenerate_triangles(self, tol: float = DEGENERATE_AREA) -> np.ndarray:
        return np.flatnonzero(np.abs(self.signed_areas()) <= tol)

    def tagged_nodes(self, tag: str) -> np.ndarray:
        sel = [i for i, t in enumerate(self.edge_tags) if t == tag]
        return np.unique(self.edges[sel]) if sel else np.zeros(0, dtype=np.int64)

    def nearest_node(self, point) -> int:
        return int(np.argmin(((self.nodes - np.asarray(point)) ** 2).sum(axis=1)))


class _Lines:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self) -> tuple[int, str]:
        while self.pos < len(self.lines):
            self.pos += 1
            s = self.lines[self.pos - 1].strip()
            if s:
                return self.pos, s
        raise MeshParseError("unexpected end of file", self.pos)

    def done(self) -> bool:
        return all(not s.strip() for s in self.lines[self.pos:])


def _ints(s: str, lineno: int) -> list[int]:
    try:
        return [int(t) for t in s.split()]
    except ValueError:
        raise MeshParseError(f"expected integers, got {s!r}", lineno) from None


def _expect_end(lines: _Lines, section: str) -> None:
    lineno, s = lines.next()
    if s != f"$End{section}":
        raise MeshParseError(f"expected $End{section}, got {s!r}", lineno)


def parse_mesh(data) -> TriangleMesh:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else str(data)
    lines = _Lines(text)
    names: dict[int, str] = {}
    node_ids: dict[int, int] = {}
    coords: list = []
    tris: list = []
    edges: list = []
    tags: list = []
    seen_format = seen_nodes = seen_elements = False
    while not lines.done():
        lineno, head = lines.next()
        if head == "$MeshFormat":
            ln, s = lines.next()
            parts = s.split()
            if len(parts) < 3 or parts[0] not in ("2.2", "2.2.0", "2"):
                raise MeshParseError(f"unsupported mesh format {s!r} (need 2.2 ASCII)", ln)
            if parts[1] != "0":
                raise MeshParseError("binary MSH files are not supported", ln)
            _expect_end(lines, "MeshFormat")
            seen_format = True
        elif head == "$PhysicalNames":
            ln, s = lines.next()
            (count,) = _ints(s, ln)
            for _ in range(count):
                ln, s = lines.next()
                parts = s.split(maxsplit=2)
                if len(parts) != 3:
                    raise MeshParseError(f"malformed physical name {s!r}", ln)
                names[int(parts[1])] = parts[2].strip().strip('"')
            _expect_end(lines, "PhysicalNames")
        elif head == "$Nodes":
            if not seen_format:
                raise MeshParseError("$Nodes before $MeshFormat", lineno)
            ln, s = lines.next()
            (count,) = _ints(s, ln)
            for _ in range(count):
                ln, s = lines.next()
                parts = s.split()
                if len(parts) != 4:
                    raise MeshParseError(f"node line needs 'id x y z', got {s!r}", ln)
                try:
                    nid = int(parts[0])
                    x, y, z = (float(t) for t in parts[1:])
                except ValueError:
                    raise MeshParseError(f"malformed node line {s!r}", ln) from None
                if abs(z) > 1e-9:
                    raise MeshParseError(f"node {nid} has z = {z}; only planar meshes are supported", ln)
                if nid in node_ids:
                    raise MeshParseError(f"duplicate node id {nid}", ln)
                node_ids[nid] = len(coords)
                coords.append((x, y))
            _expect_end(lines, "Nodes")
            seen_nodes = True
        elif head == "$Elements":
            if not seen_nodes:
                raise MeshParseError("$Elements before $Nodes", lineno)
            ln, s = lines.next()
            (count,) = _ints(s, ln)
            for _ in range(count):
                ln, s = lines.next()
                v = _ints(s, ln)
                if len(v) < 3:
                    raise MeshParseError(f"malformed element line {s!r}", ln)
                etype, ntags = v[1], v[2]
                if etype not in _SUPPORTED:
                    raise MeshParseError(f"unsupported element type {etype}", ln)
                conn = v[3 + ntags:]
                if len(conn) != _SUPPORTED[etype]:
                    raise MeshParseError(
                        f"element type {etype} needs {_SUPPORTED[etype]} nodes, got {len(conn)}", ln)
                try:
                    idx = [node_ids[c] for c in conn]
                except KeyError as e:
                    raise MeshParseError(f"element references unknown node {e.args[0]}", ln) from None
                if etype == 2:
                    tris.append(idx)
                elif etype == 1:
                    phys = v[3] if ntags >= 1 else 0
                    edges.append(idx)
                    tags.append(names.get(phys, str(phys)))
            _expect_end(lines, "Elements")
            seen_elements = True
        elif head.startswith("$"):
            raise MeshParseError(f"unsupported section {head!r}", lineno)
        else:
            raise MeshParseError(f"unexpected content {head!r}", lineno)
    if not (seen_format and seen_nodes and seen_elements):
        raise MeshParseError("missing $MeshFormat, $Nodes or $Elements section")
    if not tris:
        raise MeshParseError("mesh has no triangles")
    return TriangleMesh(np.array(coords), np.array(tris), np.array(edges).reshape(-1, 2), tags)


def write_mesh(mesh: TriangleMesh) -> str:
    tag_ids: dict[str, int] = {}
    for t in mesh.edge_tags:
        tag_ids.setdefault(t, len(tag_ids) + 1)
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat"]
    if tag_ids:
        out += ["$PhysicalNames", str(len(tag_ids))]
        out += [f'1 {i} "{name}"' for name, i in tag_ids.items()]
        out.append("$EndPhysicalNames")
    out += ["$Nodes", str(len(mesh.nodes))]
    out += [f"{i + 1} {x!r} {y!r} 0" for i, (x, y) in enumerate(mesh.nodes.tolist())]
    out.append("$EndNodes")
    n_el = len(mesh.edges) + len(mesh.triangles)
    out += ["$Elements", str(n_el)]
    eid = 1
    for (a, b), t in zip(mesh.edges.tolist(), mesh.edge_tags):
        tid = tag_ids[t]
        out.append(f"{eid} 1 2 {tid} {tid} {a + 1} {b + 1}")
        eid += 1
    for a, b, c in mesh.triangles.tolist():
        out.append(f"{eid} 2 2 0 1 {a + 1} {b + 1} {c + 1}")
        eid += 1
    out.append("$EndElements")
    return "\n".join(out) + "\n"


def read_mesh(path) -> TriangleMesh:
    return parse_mesh(Path(path).read_bytes())


def save_mesh(mesh: TriangleMesh, path) -> None:
    Path(path).write_text(write_mesh(mesh))
