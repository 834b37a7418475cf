import numpy as np

from randinfo.rng import RngStream, as_generator


def test_same_stream_same_sequence():
    a = RngStream(5, 2).generator().random(8)
    b = RngStream(5, 2).generator().random(8)
    assert np.array_equal(a, b)


def test_stream_ids_differ():
    a = RngStream(5, 0).generator().random(8)
    b = RngStream(5, 1).generator().random(8)
    assert not np.array_equal(a, b)


def test_children_are_distinct_and_stable():
    s = RngStream(9)
    draws = [s.child(i).generator().random() for i in range(20)]
    assert len(set(draws)) == 20
    assert s.child(3) == RngStream(9).child(3)


def test_as_generator_accepts_int_stream_and_generator():
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    assert np.array_equal(as_generator(7).random(3), as_generator(7).random(3))
    assert np.array_equal(as_generator(RngStream(7)).random(3), RngStream(7).generator().random(3))
