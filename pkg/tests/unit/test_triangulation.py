from fractions import Fraction

import numpy as np
import pytest

from src.state.triangulation_state import StripEncoding, Triangle, Vertex
from src.tools.boundary_chain import parse_moves, path_probability, sample_trajectory
from src.tools.triangulation import (
    build_from_moves,
    causal_moves,
    causal_weight,
    enumerate_stopped_sequences,
    moves_from_triangulation,
    remove_defects,
    restore_defects,
    to_forest,
    validate_almost_causal,
    validate_causal,
)
from src.utils.errors import IllegalMoveError, NotStoppedError


FIGURE_MOVES = "+++-+--"


def test_grow_three_boundary_example():
    act = build_from_moves(3, parse_moves(FIGURE_MOVES))

    assert act.slice_sizes == [3, 4]
    assert len(act.triangles) == 7
    assert act.stops == [0, 7]
    assert act.is_stopped
    assert validate_almost_causal(act).ok
    assert validate_causal(act).ok


def test_first_move_types_triangle():
    act = build_from_moves(3, [1])
    tri = act.triangles[0]

    assert tri.orientation == "up"
    assert tri.apex == Vertex(slice=2, position=0)
    assert set(v.slice for v in tri.vertices[1:]) == {1}


def test_moves_are_recovered_from_triangles():
    moves = parse_moves(FIGURE_MOVES)

    assert moves_from_triangulation(build_from_moves(3, moves)) == moves


def _random_permitted_moves(rng, m0, length):
    moves, m = [], m0
    for _ in range(length):
        step = 1 if m == 1 else int(rng.choice([1, -1]))
        moves.append(step)
        m += step
    return moves


def test_moves_round_trip_on_random_sequences():
    rng = np.random.default_rng(1)

    for _ in range(200):
        m0 = int(rng.integers(1, 5))
        moves = _random_permitted_moves(rng, m0, int(rng.integers(1, 21)))

        assert moves_from_triangulation(build_from_moves(m0, moves)) == moves


def test_sampled_growth_always_validates():
    for i in range(1000):
        m0 = 1 + i % 4
        traj = sample_trajectory(m0, 40, seed=11, key=(i,))
        act = build_from_moves(m0, [int(s) for s in traj.moves])

        report = validate_almost_causal(act)
        assert report.ok, (i, report.reason)


def test_triangle_spanning_two_strips_is_rejected():
    act = build_from_moves(1, parse_moves("+-+-"))
    assert act.slice_sizes == [1, 1, 1]
    bad = Triangle(
        strip=1,
        orientation="up",
        vertices=(Vertex(slice=3, position=0), Vertex(slice=1, position=0), Vertex(slice=1, position=0)),
    )
    broken = act.model_copy(update={"triangles": [bad] + list(act.triangles[1:])})

    report = validate_almost_causal(broken)

    assert report.status == "violation"
    assert report.reason == "triangle_outside_strip"
    assert report.triangle_index == 0


def test_illegal_minus_on_single_edge():
    with pytest.raises(IllegalMoveError):
        build_from_moves(1, [-1])


def test_leading_minus_leaves_a_defect():
    act = build_from_moves(2, parse_moves("-++-"))

    assert act.stops == [0, 4]
    assert validate_almost_causal(act).ok
    report = validate_causal(act)
    assert report.status == "violation"
    assert report.reason == "defect_triangle"
    assert report.triangle_index == 0


def test_remove_defects_shifts_the_strip():
    act = build_from_moves(2, parse_moves("-++-"))

    ct = remove_defects(act)

    assert ct.strips == [StripEncoding(down_degrees=[2, 0], shift=1)]
    assert ct.slice_sizes == [2, 2]
    assert validate_causal(ct).ok
    assert restore_defects(ct).source_moves == parse_moves("-++-")
    assert causal_moves(ct) == parse_moves("+-+-")


def test_remove_defects_preserves_probability():
    moves = parse_moves("-++-")
    ct = remove_defects(build_from_moves(2, moves))

    assert causal_weight(ct) == path_probability(2, moves) == Fraction(1, 16)
    assert path_probability(2, causal_moves(ct)) == Fraction(1, 16)


def test_remove_defects_needs_a_stopped_sequence():
    # stops after four moves; the fifth opens the next strip
    act = build_from_moves(2, parse_moves("-++--"))

    assert not act.is_stopped
    with pytest.raises(NotStoppedError):
        remove_defects(act)


def test_causal_image_of_defect_free_strip():
    ct = remove_defects(build_from_moves(3, parse_moves(FIGURE_MOVES)))

    assert ct.strips == [StripEncoding(down_degrees=[2, 1, 1], shift=0)]
    assert ct.root.vertex == Vertex(slice=1, position=0)
    assert ct.root.edge == (Vertex(slice=1, position=0), Vertex(slice=1, position=2))
    assert ct.root.triangle == 6
    triangles = ct.triangles()
    assert len(triangles) == 7
    assert sum(1 for t in triangles if t.orientation == "down") == 4


def test_validate_causal_flags_bad_encoding():
    ct = remove_defects(build_from_moves(3, parse_moves(FIGURE_MOVES)))
    broken = ct.model_copy(update={"strips": [StripEncoding(down_degrees=[2, 1, 2], shift=0)]})

    report = validate_causal(broken)

    assert not report.ok
    assert report.reason == "down_degree_sum"


def test_validate_causal_flags_wrong_shift():
    ct = remove_defects(build_from_moves(2, parse_moves("-++-")))
    broken = ct.model_copy(update={"strips": [StripEncoding(down_degrees=[2, 0], shift=0)]})

    assert validate_causal(broken).reason == "shift_mismatch"


def test_enumerate_stopped_sequences_smallest_case():
    assert enumerate_stopped_sequences(1, 2, 2) == [[1, -1]]
    assert enumerate_stopped_sequences(1, 1, 5) == [[]]


@pytest.mark.parametrize("m0,t,max_moves", [(2, 2, 10), (1, 3, 8)])
def test_defect_removal_is_a_bijection(m0, t, max_moves):
    images = set()
    for seq in enumerate_stopped_sequences(m0, t, max_moves):
        act = build_from_moves(m0, seq)
        ct = remove_defects(act)

        assert validate_causal(ct).ok
        assert restore_defects(ct).source_moves == seq
        assert causal_weight(ct) == path_probability(m0, seq)
        images.add(ct.model_dump_json())

    assert len(images) == len(enumerate_stopped_sequences(m0, t, max_moves))


def test_forest_of_single_strip():
    ct = remove_defects(build_from_moves(3, parse_moves(FIGURE_MOVES)))

    forest = to_forest(ct)

    assert forest.offspring == [[2, 1, 1]]
    assert forest.depth_profile() == [3, 4]
    assert forest.parents(1) == [0, 0, 1, 2]


def test_forest_profile_matches_slices():
    seq = enumerate_stopped_sequences(1, 4, 12)[-1]
    ct = remove_defects(build_from_moves(1, seq))

    assert to_forest(ct).depth_profile() == ct.slice_sizes
