"""STL reading and writing.

Binary layout: 80-byte header, little-endian uint32 facet count, then 50-byte
records (normal, three vertices as float32 triplets, uint16 attribute).
"""

from __future__ import annotations

import logging
import struct

import numpy as np

from ..errors import MalformedFile
from .mesh import TriMesh

log = logging.getLogger(__name__)

_RECORD = np.dtype([("normal", "<f4", (3,)), ("verts", "<f4", (3, 3)), ("attr", "<u2")])
assert _RECORD.itemsize == 50


def load_stl(data: bytes, name: str = "") -> TriMesh:
    """Parse binary or ASCII STL bytes. Stored normals are ignored."""
    data = bytes(data)
    if data[:5].lower() == b"solid":
        try:
            soup = _parse_ascii(data)
        except MalformedFile as ascii_err:
            try:
                soup = _parse_binary(data)
            except MalformedFile:
                raise ascii_err from None
    else:
        soup = _parse_binary(data)
    mesh = TriMesh.from_soup(soup, name=name)
    if mesh.dropped:
        log.info("dropped %d degenerate facets from %s", mesh.dropped, name or "<stl>")
    return mesh


def read_stl(path, name: str | None = None) -> TriMesh:
    with open(path, "rb") as fh:
        return load_stl(fh.read(), name=str(path) if name is None else name)


def _parse_binary(data: bytes) -> np.ndarray:
    if len(data) < 84:
        raise MalformedFile("binary STL shorter than its 84-byte preamble", len(data))
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + 50 * count
    if len(data) < expected:
        complete = (len(data) - 84) // 50
        raise MalformedFile(f"binary STL declares {count} facets but holds {complete}", 84 + 50 * complete)
    if len(data) > expected:
        raise MalformedFile(f"binary STL has {len(data) - expected} trailing bytes after {count} facets", expected)
    recs = np.frombuffer(data, dtype=_RECORD, count=count, offset=84)
    soup = recs["verts"].astype(float)
    if not np.all(np.isfinite(soup)):
        bad = int(np.argmax(~np.isfinite(soup).reshape(count, -1).all(axis=1)))
        raise MalformedFile("non-finite vertex coordinate", 84 + 50 * bad)
    return soup


def _parse_ascii(data: bytes) -> np.ndarray:
    tris: list[list[float]] = []
    pos = 0
    tokens: list[tuple[bytes, int]] = []
    for line in data.splitlines(keepends=True):
        for tok in line.split():
            tokens.append((tok, pos + line.find(tok)))
        pos += len(line)

    i = 0
    n = len(tokens)

    def expect(word: bytes):
        nonlocal i
        if i >= n:
            raise MalformedFile(f"unexpected end of file, expected {word.decode()!r}", len(data))
        tok, off = tokens[i]
        if tok.lower() != word:
            raise MalformedFile(f"expected {word.decode()!r}, found {tok[:20]!r}", off)
        i += 1

    def number() -> float:
        nonlocal i
        if i >= n:
            raise MalformedFile("unexpected end of file in coordinate", len(data))
        tok, off = tokens[i]
        try:
            val = float(tok)
        except ValueError:
            raise MalformedFile(f"bad number {tok[:20]!r}", off) from None
        i += 1
        return val

    saw_end = False
    while i < n:
        tok = tokens[i][0].lower()
        if tok == b"solid":
            i += 1
            # optional solid name runs to the first facet/endsolid
            while i < n and tokens[i][0].lower() not in (b"facet", b"endsolid"):
                i += 1
        elif tok == b"facet":
            i += 1
            expect(b"normal")
            for _ in range(3):
                number()
            expect(b"outer")
            expect(b"loop")
            tri = []
            for _ in range(3):
                expect(b"vertex")
                tri += [number(), number(), number()]
            expect(b"endloop")
            expect(b"endfacet")
            tris.append(tri)
        elif tok == b"endsolid":
            saw_end = True
            i += 1
            while i < n and tokens[i][0].lower() != b"solid":
                i += 1
        else:
            raise MalformedFile(f"unexpected token {tokens[i][0][:20]!r}", tokens[i][1])
    if not saw_end:
        raise MalformedFile("missing 'endsolid'", len(data))
    return np.array(tris, dtype=float).reshape(-1, 3, 3)


def _normals(soup: np.ndarray) -> np.ndarray:
    n = np.cross(soup[:, 1] - soup[:, 0], soup[:, 2] - soup[:, 0])
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    return np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)


def dump_stl_binary(mesh: TriMesh, header: bytes = b"tetherplan") -> bytes:
    soup = mesh.corners
    recs = np.zeros(len(soup), dtype=_RECORD)
    recs["normal"] = _normals(soup)
    recs["verts"] = soup
    return header[:80].ljust(80, b"\0") + struct.pack("<I", len(soup)) + recs.tobytes()


def dump_stl_ascii(mesh: TriMesh, name: str = "mesh") -> str:
    soup = mesh.corners
    out = [f"solid {name}"]
    for nrm, tri in zip(_normals(soup).tolist(), soup.tolist()):
        out.append(f"  facet normal {nrm[0]:.9g} {nrm[1]:.9g} {nrm[2]:.9g}")
        out.append("    outer loop")
        out += [f"      vertex {x!r} {y!r} {z!r}" for x, y, z in tri]
        out.append("    endloop")
        out.append("  endfacet")
    out.append(f"endsolid {name}")
    return "\n".join(out) + "\n"
