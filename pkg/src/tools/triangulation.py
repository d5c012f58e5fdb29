"""
Geometry of the grown triangulation.

The boundary is kept as a cyclic list [x_1, ..., x_m] whose marked edge is
(x_m, x_1). A (+)-move glues a triangle with a new vertex y on the marked edge
and appends y; a (-)-move glues the triangle (x_m, x_1, x_2) and removes x_1.
A new vertex lies one slice above the lower endpoint of the marked edge.

Causal triangulations are stored strip by strip as down-degree sequences:
walking around strip i, lower vertex v_j carries d_j down triangles followed
by the up triangle on (v_j, v_{j+1}).
"""

import logging
from collections import deque
from fractions import Fraction
from typing import Deque, Dict, Iterator, List, Optional, Sequence, Tuple, Union

from src.state.chain_state import MoveSequence
from src.state.triangulation_state import (
    AlmostCausalTriangulation,
    CausalTriangulation,
    Root,
    RootedForest,
    StripEncoding,
    Triangle,
    ValidationReport,
    Vertex,
)
from src.utils.errors import (
    DomainError,
    IllegalMoveError,
    NotGrowthRepresentableError,
    NotStoppedError,
)


logger = logging.getLogger(__name__)

PLUS, MINUS = 1, -1


def _triangle(raw: Tuple[Vertex, Vertex, Vertex]) -> Triangle:
    """Type a triangle from its vertices listed in boundary order."""
    slices = [v.slice for v in raw]
    lo, hi = min(slices), max(slices)
    if lo == hi:
        return Triangle(strip=lo, orientation="up", vertices=raw)
    for i, v in enumerate(raw):
        others = [raw[(i + 1) % 3], raw[(i + 2) % 3]]
        if others[0].slice == others[1].slice != v.slice:
            orientation = "up" if v.slice > others[0].slice else "down"
            rest = [u for j, u in enumerate(raw) if j != i]
            return Triangle(strip=lo, orientation=orientation, vertices=(v, rest[0], rest[1]))
    raise NotGrowthRepresentableError(f"triangle spans slices {slices}")


def build_from_moves(m0: int, moves: MoveSequence) -> AlmostCausalTriangulation:
    """Glue one triangle per move onto the initial boundary of length ``m0``."""
    if m0 < 1:
        raise DomainError("m0 must be a positive integer")
    slice_sizes = [m0]
    boundary: Deque[Vertex] = deque(Vertex(slice=1, position=p) for p in range(m0))
    triangles: List[Triangle] = []
    stops = [0]
    m_stop, minus = m0, 0

    for i, sign in enumerate(moves):
        xm, x1 = boundary[-1], boundary[0]
        if sign == PLUS:
            level = min(xm.slice, x1.slice) + 1
            if level > len(slice_sizes):
                slice_sizes.append(0)
            y = Vertex(slice=level, position=slice_sizes[level - 1])
            slice_sizes[level - 1] += 1
            triangles.append(_triangle((xm, y, x1)))
            boundary.append(y)
        elif sign == MINUS:
            if len(boundary) == 1:
                raise IllegalMoveError(i)
            x2 = boundary[1]
            triangles.append(_triangle((xm, x1, x2)))
            boundary.popleft()
            minus += 1
            if minus == m_stop:
                stops.append(i + 1)
                m_stop, minus = len(boundary), 0
        else:
            raise DomainError(f"move {i} has sign {sign!r}")

    return AlmostCausalTriangulation(
        m0=m0,
        height=len(slice_sizes),
        slice_sizes=slice_sizes,
        triangles=triangles,
        marked_edge=(boundary[-1], boundary[0]),
        source_moves=list(moves),
        stops=stops,
    )


def moves_from_triangulation(tri: AlmostCausalTriangulation) -> MoveSequence:
    """Read the move sequence back off the triangles: a triangle bringing a new vertex is a (+)-move."""
    seen = {(1, p) for p in range(tri.m0)}
    moves: MoveSequence = []
    for i, t in enumerate(tri.triangles):
        fresh = [v for v in t.vertices if v.key() not in seen]
        if len(fresh) > 1:
            raise NotGrowthRepresentableError(f"triangle {i} introduces {len(fresh)} vertices")
        if fresh:
            seen.add(fresh[0].key())
            moves.append(PLUS)
        else:
            moves.append(MINUS)

    try:
        rebuilt = build_from_moves(tri.m0, moves)
    except IllegalMoveError as exc:
        raise NotGrowthRepresentableError(f"no growth sequence produces this triangulation: {exc}") from exc
    if (
        rebuilt.triangles != tri.triangles
        or rebuilt.slice_sizes != tri.slice_sizes
        or rebuilt.marked_edge != tri.marked_edge
    ):
        raise NotGrowthRepresentableError("rebuilding from the recovered moves gives a different triangulation")
    return moves


# ---------------------------------------------------------------------------
# Defect removal
# ---------------------------------------------------------------------------


def _strips(moves: Sequence[int], stops: Sequence[int]) -> Iterator[List[int]]:
    for a, b in zip(stops, stops[1:]):
        yield list(moves[a:b])


def _leading_minus(strip: Sequence[int]) -> int:
    l = 0
    while l < len(strip) and strip[l] == MINUS:
        l += 1
    return l


def _down_degrees(corrected: Sequence[int]) -> List[int]:
    """Down-degree of every lower vertex of a defect-free strip, in appearance order."""
    degrees: List[int] = []
    count = 0
    for sign in corrected[1:]:
        if sign == PLUS:
            count += 1
        else:
            degrees.append(count)
            count = 0
    # the closing (-)-move is a down triangle at the last lower vertex
    degrees[-1] += 1
    return degrees


def _trailing_zeros(values: Sequence[int]) -> int:
    n = 0
    for v in reversed(values):
        if v != 0:
            break
        n += 1
    return n


def _unshift(down_degrees: Sequence[int], shift: int) -> List[int]:
    if shift == 0:
        return list(down_degrees)
    return list(down_degrees[-shift:]) + list(down_degrees[:-shift])


def _strip_moves(degrees: Sequence[int]) -> List[int]:
    moves = [PLUS]
    last = len(degrees) - 1
    for j, d in enumerate(degrees):
        moves.extend([PLUS] * (d - 1 if j == last else d))
        moves.append(MINUS)
    return moves


def _root(slice_sizes: Sequence[int]) -> Root:
    k1 = slice_sizes[0]
    v0 = Vertex(slice=1, position=0)
    triangle = k1 + slice_sizes[1] - 1 if len(slice_sizes) > 1 else None
    return Root(vertex=v0, edge=(v0, Vertex(slice=1, position=k1 - 1)), triangle=triangle)


def remove_defects(tri: AlmostCausalTriangulation) -> CausalTriangulation:
    """
    Map a stopped grown triangulation to its causal image.

    In every strip the leading pattern (-)^l (+) is replaced by (+) (-)^l, and
    the strip is re-rooted l lower vertices further on. The first l lower
    vertices of the corrected strip carry no down triangles while the last one
    always carries the closing triangle, so the shift can be read back as the
    number of trailing zeros of the stored sequence.
    """
    if not tri.is_stopped:
        raise NotStoppedError(
            f"moves end at n={len(tri.source_moves)}, last strip stop is n={tri.stops[-1]}"
        )
    strips: List[StripEncoding] = []
    for strip in _strips(tri.source_moves, tri.stops):
        l = _leading_minus(strip)
        corrected = [PLUS] + [MINUS] * l + strip[l + 1:]
        degrees = _down_degrees(corrected)
        strips.append(StripEncoding(down_degrees=degrees[l:] + degrees[:l], shift=l))

    height = len(tri.stops)
    slice_sizes = list(tri.slice_sizes[:height])
    logger.info(
        "[Triangulation] remove_defects",
        extra={"height": height, "defect_strips": sum(1 for s in strips if s.shift)},
    )
    return CausalTriangulation(
        m0=tri.m0,
        height=height,
        slice_sizes=slice_sizes,
        strips=strips,
        root=_root(slice_sizes),
    )


def causal_moves(ct: CausalTriangulation) -> MoveSequence:
    """The defect-free growth sequence whose triangulation is ``ct`` (up to re-rooting)."""
    moves: MoveSequence = []
    for enc in ct.strips:
        moves.extend(_strip_moves(_unshift(enc.down_degrees, enc.shift)))
    return moves


def restore_defects(ct: CausalTriangulation) -> AlmostCausalTriangulation:
    """Inverse of ``remove_defects``."""
    moves: MoveSequence = []
    for i, enc in enumerate(ct.strips, start=1):
        l = enc.shift
        corrected = _strip_moves(_unshift(enc.down_degrees, l))
        if any(s != MINUS for s in corrected[1:1 + l]):
            raise DomainError(f"strip {i}: shift {l} does not match its down-degree sequence")
        moves.extend([MINUS] * l + [PLUS] + corrected[1 + l:])
    return build_from_moves(ct.m0, moves)


def causal_weight(ct: CausalTriangulation, exact: bool = True) -> Union[Fraction, float]:
    """UICT weight (k_t / m0) 2^{-n_t} of the section ``ct``."""
    n_t = sum(ct.slice_sizes[i] + ct.slice_sizes[i + 1] for i in range(ct.height - 1))
    if exact:
        return Fraction(ct.slice_sizes[-1], ct.m0 * 2**n_t)
    return ct.slice_sizes[-1] / ct.m0 * 2.0 ** (-n_t)


def enumerate_stopped_sequences(m0: int, t: int, max_moves: int) -> List[MoveSequence]:
    """Every permitted growth sequence of at most ``max_moves`` moves that ends exactly at n_t."""
    if m0 < 1 or t < 1:
        raise DomainError("m0 and t must be positive")
    found: List[MoveSequence] = []

    def walk(seq: List[int], m: int, m_stop: int, minus: int, stops: int) -> None:
        if stops == t:
            found.append(list(seq))
            return
        if len(seq) == max_moves:
            return
        seq.append(PLUS)
        walk(seq, m + 1, m_stop, minus, stops)
        seq.pop()
        if m > 1:
            seq.append(MINUS)
            if minus + 1 == m_stop:
                walk(seq, m - 1, m - 1, 0, stops + 1)
            else:
                walk(seq, m - 1, m_stop, minus + 1, stops)
            seq.pop()

    walk([], m0, m0, 0, 1)
    return found


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _violation(reason: str, index: Optional[int] = None, **detail: int) -> ValidationReport:
    return ValidationReport(status="violation", reason=reason, triangle_index=index, detail=detail)


def _check_slices(m0: int, height: int, slice_sizes: Sequence[int]) -> Optional[ValidationReport]:
    if len(slice_sizes) != height:
        return _violation("height_mismatch", height=height, slices=len(slice_sizes))
    if slice_sizes and slice_sizes[0] != m0:
        return _violation("first_slice_not_m0", k1=slice_sizes[0], m0=m0)
    for j, k in enumerate(slice_sizes, start=1):
        if k <= 0:
            return _violation("empty_slice", slice=j)
    return None


def _check_triangle(t: Triangle, slice_sizes: Sequence[int], index: int) -> Optional[ValidationReport]:
    for v in t.vertices:
        if v.slice < 1 or v.slice > len(slice_sizes) or v.position >= slice_sizes[v.slice - 1]:
            return _violation("vertex_out_of_range", index, slice=v.slice, position=v.position)
    slices = t.slices
    if min(slices) != t.strip or max(slices) > t.strip + 1:
        return _violation("triangle_outside_strip", index, strip=t.strip)
    return None


def validate_almost_causal(tri: AlmostCausalTriangulation) -> ValidationReport:
    """Every slice is non-empty and every triangle lies in one strip."""
    bad = _check_slices(tri.m0, tri.height, tri.slice_sizes)
    if bad:
        return bad
    for i, t in enumerate(tri.triangles):
        bad = _check_triangle(t, tri.slice_sizes, i)
        if bad:
            return bad
    for strip, (a, b) in enumerate(zip(tri.stops, tri.stops[1:]), start=1):
        if b > len(tri.triangles):
            return _violation("stop_beyond_triangles", strip=strip)
        for i in range(a, b):
            if tri.triangles[i].strip != strip:
                return _violation("triangle_in_wrong_strip", i, strip=strip)
        if b - a != tri.slice_sizes[strip - 1] + tri.slice_sizes[strip]:
            return _violation("strip_triangle_count", a, strip=strip, count=b - a)
    return ValidationReport()


def validate_causal(tri: Union[CausalTriangulation, AlmostCausalTriangulation]) -> ValidationReport:
    """
    Every triangle has exactly one edge on a slice circle. For causal
    triangulations the encoding and the root on slice 1 are checked as well.
    """
    if isinstance(tri, AlmostCausalTriangulation):
        base = validate_almost_causal(tri)
        if not base.ok:
            return base
        for i, t in enumerate(tri.triangles):
            if len(set(t.slices)) != 2:
                return _violation("defect_triangle", i, strip=t.strip)
        return ValidationReport()

    bad = _check_slices(tri.m0, tri.height, tri.slice_sizes)
    if bad:
        return bad
    if len(tri.strips) != tri.height - 1:
        return _violation("strip_count", strips=len(tri.strips), height=tri.height)
    for i, enc in enumerate(tri.strips, start=1):
        k_lo, k_hi = tri.slice_sizes[i - 1], tri.slice_sizes[i]
        if len(enc.down_degrees) != k_lo or any(d < 0 for d in enc.down_degrees):
            return _violation("down_degree_length", strip=i)
        if sum(enc.down_degrees) != k_hi:
            return _violation("down_degree_sum", strip=i, total=sum(enc.down_degrees))
        if enc.shift != _trailing_zeros(enc.down_degrees):
            return _violation("shift_mismatch", strip=i, shift=enc.shift)

    counts: Dict[Tuple[int, str], int] = {}
    for i, t in enumerate(tri.triangles()):
        bad = _check_triangle(t, tri.slice_sizes, i)
        if bad:
            return bad
        if len(set(t.slices)) != 2:
            return _violation("defect_triangle", i, strip=t.strip)
        counts[(t.strip, t.orientation)] = counts.get((t.strip, t.orientation), 0) + 1
    for i in range(1, tri.height):
        if counts.get((i, "up"), 0) != tri.slice_sizes[i - 1] or counts.get((i, "down"), 0) != tri.slice_sizes[i]:
            return _violation("strip_triangle_count", strip=i)

    expected = _root(tri.slice_sizes)
    if tri.root.vertex != expected.vertex or tri.root.edge != expected.edge:
        return _violation("root_placement", slice=tri.root.vertex.slice, position=tri.root.vertex.position)
    return ValidationReport()


def to_forest(tri: CausalTriangulation) -> RootedForest:
    """
    Dual forest: horizontal edges are dropped and every upper vertex keeps the
    edge to the lower vertex whose down triangles it opens. Children of v_j are
    the d_j consecutive upper vertices starting after those of v_0 ... v_{j-1}.
    """
    report = validate_causal(tri)
    if not report.ok:
        raise DomainError(f"not a causal triangulation: {report.reason}")
    offspring: List[List[int]] = []
    for depth, enc in enumerate(tri.strips):
        k = len(enc.down_degrees)
        if depth == 0:
            offspring.append(list(enc.down_degrees))
        else:
            # planar order at this depth follows the upper vertices of the strip below
            offspring.append([enc.down_degrees[(p - enc.shift) % k] for p in range(k)])
    return RootedForest(m0=tri.m0, offspring=offspring)
