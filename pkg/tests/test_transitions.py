import random

import pytest
from hypothesis import given, settings, strategies as st

from semiparse.corpus import make_sentence
from semiparse.transitions import (ARC_EAGER, ARC_STANDARD, REDUCE, SHIFT, SWAP, Configuration, LeftArc,
                                   RightArc, Transition, TransitionError, UnsupportedStructure, apply,
                                   finalize, get_system, initial_configuration, inventory, oracle_sequence,
                                   permissible, replay)
from oracles import random_tree

FORMS = ["A", "hearing", "is", "scheduled", "on", "the", "issue"]
TAGS = ["DT", "NN", "VBZ", "VBN", "IN", "DT", "NN"]
HEADS = [2, 3, 0, 3, 2, 7, 5]
LABELS = ["DET", "SBJ", "ROOT", "VG", "NMOD", "DET", "PC"]


def hearing():
    return make_sentence(FORMS, TAGS, HEADS, LABELS)


def _cfg(stack, buffer=(), n=6):
    return Configuration(ARC_STANDARD, tuple(stack), tuple(buffer), (-1,) * (n + 1), (None,) * (n + 1))


# (transitions of the block, stack after it, buffer after it); root is on the stack from the start
WORKED = [
    ([SHIFT] * 2, [0, 1, 2], [3, 4, 5, 6, 7]),
    ([LeftArc("DET")], [0, 2], [3, 4, 5, 6, 7]),
    ([SHIFT] * 3, [0, 2, 3, 4, 5], [6, 7]),
    ([SWAP] * 2, [0, 2, 5], [3, 4, 6, 7]),
    ([SHIFT] * 3, [0, 2, 5, 3, 4, 6], [7]),
    ([SWAP] * 2, [0, 2, 5, 6], [3, 4, 7]),
    ([SHIFT] * 3, [0, 2, 5, 6, 3, 4, 7], []),
    ([SWAP] * 2, [0, 2, 5, 6, 7], [3, 4]),
    ([LeftArc("DET")], [0, 2, 5, 7], [3, 4]),
    ([RightArc("PC"), RightArc("NMOD")], [0, 2], [3, 4]),
    ([SHIFT], [0, 2, 3], [4]),
    ([LeftArc("SBJ")], [0, 3], [4]),
    ([SHIFT], [0, 3, 4], []),
    ([RightArc("VG"), RightArc("ROOT")], [0], []),
]


def test_initial_configuration():
    c = initial_configuration(make_sentence(["a", "b", "c"]))
    assert c.stack == (0,) and c.buffer == (1, 2, 3) and not c.arcs and c.history == ()


def test_empty_sentence_terminal():
    assert initial_configuration(make_sentence([])).is_terminal()
    assert initial_configuration(make_sentence([]), ARC_EAGER).is_terminal()


def test_worked_example_initial_panel():
    c = initial_configuration(hearing())
    assert c.stack == (0,) and c.buffer == tuple(range(1, 8))


def test_worked_example_oracle_trace():
    expected = [t for block, _, _ in WORKED for t in block]
    assert oracle_sequence(hearing()) == expected
    assert len(expected) == 26


def test_worked_example_panels():
    c = initial_configuration(hearing())
    for block, stack, buffer in WORKED:
        for t in block:
            c = apply(c, t)
        assert list(c.stack) == stack and list(c.buffer) == buffer
    assert c.is_terminal()
    heads, labels = finalize(c)
    assert heads == HEADS and labels == LABELS


def test_swap_permissibility():
    assert permissible(_cfg([0, 3, 5]), SWAP)
    assert not permissible(_cfg([0, 5, 3]), SWAP)
    assert not permissible(_cfg([0, 3]), SWAP)


def test_leftarc_needs_non_root():
    assert not permissible(_cfg([0, 4]), LeftArc("X"))
    assert permissible(_cfg([0, 2, 4]), LeftArc("X"))


def test_root_rightarc_only_at_end():
    assert not permissible(_cfg([0, 1], [2]), RightArc("ROOT"))
    assert permissible(_cfg([0, 1], []), RightArc("ROOT"))


def test_rightarc_example():
    c = _cfg([0, 2, 3], [], n=3)
    c2 = apply(c, RightArc("OBJ"))
    assert (2, 3, "OBJ") in c2.arcs and c2.stack == (0, 2)


def test_apply_is_pure():
    c = _cfg([0, 2, 4], [5])
    before = (c.stack, c.buffer, c.arcs, c.history)
    apply(c, LeftArc("X"))
    apply(c, SHIFT)
    assert (c.stack, c.buffer, c.arcs, c.history) == before


def test_non_permissible_raises():
    with pytest.raises(TransitionError):
        apply(_cfg([0]), LeftArc("X"))
    with pytest.raises(TransitionError):
        apply(_cfg([0, 1], [], n=1), SWAP)


def test_transition_labels_only_on_arcs():
    assert str(LeftArc("X")) == "LA:X" and str(SHIFT) == "SH"
    assert Transition.parse("RA:OBJ") == RightArc("OBJ")
    assert not SHIFT.is_arc and LeftArc("X").is_arc


def test_inventory_order():
    assert [str(t) for t in inventory(ARC_STANDARD, ["B", "A"])] == ["SH", "LA:A", "LA:B", "RA:A", "RA:B", "SW"]
    assert [str(t) for t in inventory(ARC_EAGER, ["A"])] == ["SH", "LA:A", "RA:A", "RE"]


def test_projective_oracle_has_no_swap():
    rng = random.Random(5)
    seen = 0
    while seen < 200:
        s = random_tree(rng.randint(1, 10), rng)
        if s.is_projective():
            seen += 1
            assert SWAP not in oracle_sequence(s)


@pytest.mark.parametrize("system", [ARC_STANDARD, ARC_EAGER])
def test_oracle_roundtrip(system):
    rng = random.Random(11)
    for _ in range(300):
        s = random_tree(rng.randint(1, 12), rng)
        if system == ARC_EAGER and not s.is_projective():
            continue
        c = replay(s, oracle_sequence(s, system), system)
        assert c.is_terminal()
        assert finalize(c) == (s.heads, s.deprels)


def test_arc_eager_rejects_non_projective():
    with pytest.raises(UnsupportedStructure):
        oracle_sequence(hearing(), ARC_EAGER)


def test_arc_eager_finalize_attaches_to_root():
    c = initial_configuration(make_sentence(["a", "b"]), ARC_EAGER)
    c = apply(apply(c, SHIFT), SHIFT)
    assert c.is_terminal()
    assert finalize(c) == ([0, 0], ["ROOT", "ROOT"])


def _walk(system, n, rng):
    sys_ = get_system(system)
    labels = ["A", "B"]
    c = sys_.initial(n)
    steps = 0
    while not sys_.is_terminal(c):
        cands = sys_.candidates(c, labels)
        assert cands, f"deadlock at {c!r}"
        assert all(sys_.permissible(c, t) for t in cands)
        c = sys_.apply(c, rng.choice(cands))
        steps += 1
        deps = [d for (_, d, _) in c.arcs]
        assert len(deps) == len(set(deps))
        assert not set(c.stack) & set(c.buffer)
        assert steps <= 4 * max(n, 1) ** 2 + 4
    return c


@settings(max_examples=200)
@given(st.integers(0, 12), st.integers(0, 2**31), st.sampled_from([ARC_STANDARD, ARC_EAGER]))
def test_random_walks_terminate_without_deadlock(n, seed, system):
    c = _walk(system, n, random.Random(seed))
    heads, _ = finalize(c)
    if system == ARC_STANDARD:
        assert c.stack == (0,)
    assert all(h >= 0 for h in heads)


def test_swap_never_repeats_pair():
    rng = random.Random(2)
    sys_ = get_system(ARC_STANDARD)
    for _ in range(100):
        c = sys_.initial(8)
        swapped = set()
        while not sys_.is_terminal(c):
            t = rng.choice(sys_.candidates(c, ["A"]))
            if t == SWAP:
                pair = (c.stack[-2], c.stack[-1])
                assert pair not in swapped
                swapped.add(pair)
            c = sys_.apply(c, t)


def test_reduce_only_in_arc_eager():
    c = initial_configuration(make_sentence(["a"]))
    assert not permissible(c, REDUCE)
