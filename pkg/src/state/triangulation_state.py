from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


class Vertex(BaseModel):
    """A vertex identified by its slice (distance to the 0-root) and its position on that slice."""

    model_config = ConfigDict(frozen=True)

    slice: int = Field(..., ge=0)
    position: int = Field(..., ge=0)

    def key(self) -> Tuple[int, int]:
        return (self.slice, self.position)


class Triangle(BaseModel):
    """
    A triangle of the strip S^1 x [strip, strip + 1].

    ``vertices`` is ``(apex, base_a, base_b)``; the base is the edge lying on a
    slice circle. ``up`` triangles have their base on the lower slice, ``down``
    triangles on the upper one. A triangle with all three vertices on one slice
    is stored as ``up`` with its apex on that slice.
    """

    model_config = ConfigDict(frozen=True)

    strip: int = Field(..., ge=1)
    orientation: Literal["up", "down"]
    vertices: Tuple[Vertex, Vertex, Vertex]

    @property
    def apex(self) -> Vertex:
        return self.vertices[0]

    @property
    def slices(self) -> Tuple[int, int, int]:
        return tuple(v.slice for v in self.vertices)  # type: ignore[return-value]


class AlmostCausalTriangulation(BaseModel):
    """The triangulation T_n grown by a move sequence."""

    m0: int = Field(..., ge=1)
    height: int = Field(..., ge=1, description="Number of slices carrying vertices.")
    slice_sizes: List[int] = Field(..., description="k_1 ... k_height.")
    triangles: List[Triangle] = Field(default_factory=list)
    marked_edge: Tuple[Vertex, Vertex]
    source_moves: List[int] = Field(default_factory=list)
    stops: List[int] = Field(
        default_factory=lambda: [0],
        description="Strip stopping times n_1 = 0 < n_2 < ... reached by source_moves.",
    )

    @property
    def is_stopped(self) -> bool:
        return self.stops[-1] == len(self.source_moves)


class StripEncoding(BaseModel):
    """One strip of a causal triangulation: down-degree of every lower vertex and its root shift."""

    down_degrees: List[int] = Field(..., description="d_j for lower vertices j = 0..k_i - 1.")
    shift: int = Field(default=0, ge=0, description="Cyclic shift l applied when the defects were removed.")


class Root(BaseModel):
    vertex: Vertex
    edge: Tuple[Vertex, Vertex]
    triangle: Optional[int] = Field(default=None, description="Index of the marked triangle of strip 1 in triangles().")


class CausalTriangulation(BaseModel):
    """
    A defect-free triangulation stored as slice sizes plus per-strip
    down-degree sequences. Slice i is labelled so that position 0 is the
    first lower vertex of strip i; the top slice keeps appearance order.
    """

    m0: int = Field(..., ge=1)
    height: int = Field(..., ge=1)
    slice_sizes: List[int]
    strips: List[StripEncoding] = Field(default_factory=list)
    root: Root

    def triangles(self) -> List[Triangle]:
        out: List[Triangle] = []
        for i, enc in enumerate(self.strips, start=1):
            k_lo = self.slice_sizes[i - 1]
            k_hi = self.slice_sizes[i]
            up_shift = self.strips[i].shift if i < len(self.strips) else 0

            def upper(p: int) -> Vertex:
                return Vertex(slice=i + 1, position=(p - up_shift) % k_hi)

            p = 0
            for j, d in enumerate(enc.down_degrees):
                v = Vertex(slice=i, position=j)
                for _ in range(d):
                    out.append(Triangle(strip=i, orientation="down", vertices=(v, upper(p), upper(p + 1))))
                    p += 1
                nxt = Vertex(slice=i, position=(j + 1) % k_lo)
                out.append(Triangle(strip=i, orientation="up", vertices=(upper(p), v, nxt)))
        return out


class RootedForest(BaseModel):
    """
    Plane forest dual to a causal triangulation. ``offspring[d][p]`` is the
    number of children of the p-th vertex (planar order) at depth d.
    """

    m0: int = Field(..., ge=1)
    offspring: List[List[int]] = Field(default_factory=list)

    def depth_profile(self) -> List[int]:
        profile = [self.m0]
        for level in self.offspring:
            profile.append(sum(level))
        return profile

    def parents(self, depth: int) -> List[int]:
        """Planar index of the parent of every vertex at ``depth`` (depth >= 1)."""
        out: List[int] = []
        for parent, count in enumerate(self.offspring[depth - 1]):
            out.extend([parent] * count)
        return out


class ValidationReport(BaseModel):
    status: Literal["pass", "violation"] = "pass"
    reason: Optional[str] = None
    triangle_index: Optional[int] = None
    detail: Dict[str, int] = Field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "pass"
