"""Structure tests for the atom tower: builders, regularity, schedule."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mblab.filtration import (
    FiltrationError,
    build_dyadic,
    build_random_regular,
    filtration_from_json,
    filtration_to_json,
    level_partition,
    regularity_delta,
    split_schedule,
)


def test_dyadic_shape(dyadic3):
    assert dyadic3.depth == 3
    assert dyadic3.n_leaves == 8
    assert dyadic3.total_measure == pytest.approx(1.0, abs=0)
    assert regularity_delta(dyadic3) == pytest.approx(0.5, abs=1e-15)
    widths = dyadic3.leaf_measures()
    assert np.allclose(widths, 0.125, atol=1e-15)


def test_dyadic_depth_one_is_single_split(dyadic1):
    assert dyadic1.n_leaves == 2
    events = split_schedule(dyadic1)
    assert len(events) == 1
    assert events[0].atom == dyadic1.root.id


def test_root_and_interval(dyadic2):
    assert dyadic2.root.a == 0.0
    assert dyadic2.root.b == 1.0
    assert dyadic2.interval == (0.0, 1.0)
    assert dyadic2.root.parent is None


def test_children_partition_parent(dyadic3):
    for atom in dyadic3.atoms:
        if not atom.children:
            continue
        kids = [dyadic3.atom(c) for c in atom.children]
        # contiguous, measure preserving, left to right
        assert kids[0].a == atom.a
        assert kids[-1].b == atom.b
        for left, right in zip(kids, kids[1:]):
            assert left.b == right.a
        assert sum(k.measure for k in kids) == pytest.approx(atom.measure, rel=1e-12)


def test_schedule_order_level_then_endpoint(dyadic3):
    events = split_schedule(dyadic3)
    keys = [(dyadic3.atom(e.atom).level, dyadic3.atom(e.atom).a) for e in events]
    assert keys == sorted(keys)


def test_schedule_refines_one_atom_at_a_time(dyadic3):
    for ev in split_schedule(dyadic3):
        prev = set(ev.prev_partition)
        post = set(ev.post_partition)
        gone = prev - post
        new = post - prev
        assert gone == {ev.atom}
        assert new == set(dyadic3.atom(ev.atom).children)


def test_schedule_covers_active_set(dyadic3):
    events = split_schedule(dyadic3)
    assert {e.atom for e in events} == set(dyadic3.active_set)
    assert len(events) == len(dyadic3.active_set)


def test_level_partition_measures(dyadic3):
    for n in range(dyadic3.depth + 1):
        part = level_partition(dyadic3, n)
        total = sum(dyadic3.atom(a).measure for a in part)
        assert total == pytest.approx(1.0, rel=1e-12)
    assert list(level_partition(dyadic3, 0)) == [dyadic3.root.id]
    assert set(level_partition(dyadic3, dyadic3.depth)) == set(dyadic3.leaves)


def test_random_regular_respects_floor():
    filt = build_random_regular(depth=4, delta=0.2, max_children=4, split_prob=0.8, seed=11)
    assert regularity_delta(filt) >= 0.2 - 1e-12
    for atom in filt.atoms:
        for c in atom.children:
            ratio = filt.atom(c).measure / atom.measure
            assert ratio >= 0.2 - 1e-12


def test_random_regular_critical_delta_forces_equal_split():
    # k * delta == 1 leaves a single feasible ratio vector
    filt = build_random_regular(depth=3, delta=0.5, max_children=2, split_prob=1.0, seed=3)
    for atom in filt.atoms:
        if atom.children:
            ratios = [filt.atom(c).measure / atom.measure for c in atom.children]
            assert ratios == pytest.approx([0.5, 0.5], abs=1e-12)


def test_random_regular_rejects_bad_parameters():
    with pytest.raises(FiltrationError):
        build_random_regular(depth=0, delta=0.25, max_children=2, split_prob=0.5, seed=0)
    with pytest.raises(FiltrationError):
        build_random_regular(depth=2, delta=0.0, max_children=2, split_prob=0.5, seed=0)
    with pytest.raises(FiltrationError):
        build_random_regular(depth=2, delta=0.6, max_children=2, split_prob=0.5, seed=0)
    with pytest.raises(FiltrationError):
        build_random_regular(depth=2, delta=0.25, max_children=1, split_prob=0.5, seed=0)
    with pytest.raises(FiltrationError):
        # 3 children cannot all carry ratio >= 0.4
        build_random_regular(depth=2, delta=0.4, max_children=3, split_prob=0.5, seed=0)
    with pytest.raises(FiltrationError):
        build_random_regular(depth=2, delta=0.25, max_children=2, split_prob=1.5, seed=0)


def test_random_regular_is_seed_deterministic():
    a = build_random_regular(depth=4, delta=0.15, max_children=4, split_prob=0.7, seed=42)
    b = build_random_regular(depth=4, delta=0.15, max_children=4, split_prob=0.7, seed=42)
    assert [(x.a, x.b, x.level) for x in a.atoms] == [(x.a, x.b, x.level) for x in b.atoms]


def test_json_roundtrip():
    filt = build_random_regular(depth=3, delta=0.2, max_children=3, split_prob=0.7, seed=5)
    back = filtration_from_json(filtration_to_json(filt))
    assert back.n_leaves == filt.n_leaves
    assert back.depth == filt.depth
    assert [(x.id, x.a, x.b, x.level, x.parent, x.children) for x in back.atoms] == [
        (x.id, x.a, x.b, x.level, x.parent, x.children) for x in filt.atoms
    ]
    assert [e.atom for e in split_schedule(back)] == [e.atom for e in split_schedule(filt)]


@settings(max_examples=40, deadline=None)
@given(
    depth=st.integers(min_value=1, max_value=5),
    delta_k=st.sampled_from([(0.5, 2), (0.3, 3), (0.2, 4), (0.1, 5)]),
    seed=st.integers(min_value=0, max_value=10_000),
)
def test_random_regular_invariants(depth, delta_k, seed):
    delta, k = delta_k
    filt = build_random_regular(depth, delta, k, split_prob=0.7, seed=seed)
    assert regularity_delta(filt) >= delta - 1e-12
    # leaves tile the unit interval
    leaves = sorted((filt.atom(i) for i in filt.leaves), key=lambda a: a.a)
    assert leaves[0].a == 0.0
    assert leaves[-1].b == 1.0
    for left, right in zip(leaves, leaves[1:]):
        assert math.isclose(left.b, right.a, abs_tol=1e-12)
    # schedule replays into exactly the leaf partition
    events = split_schedule(filt)
    part = {filt.root.id}
    for ev in events:
        assert ev.atom in part
        part.discard(ev.atom)
        part.update(filt.atom(ev.atom).children)
    assert part == set(filt.leaves)
