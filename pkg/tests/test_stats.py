import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vomc.stats import (
    CountTable,
    backward_stats,
    direct_path_counts,
    forward_stats,
    pack_suffix,
    path_suffixes,
    reconstruct_counts,
    unpack_suffix,
)

a, b, c = 0, 1, 2


def test_worked_string_suffix_counts(abcabbc):
    t = CountTable(3, 2).extend(abcabbc)
    assert t.get((b, a)).tolist() == [0, 1, 1]  # suffix (a, b) chronologically
    assert t.total(()) == 7


def test_single_update():
    t = CountTable(3, 2)
    t.update(a)
    assert t.get(()).tolist() == [1, 0, 0]
    with pytest.raises(ValueError):
        t.update(3)


def test_forward_stats_examples(abcabbc):
    t = CountTable(3, 2).extend([a, b, a, b])
    assert forward_stats(t, (a,)).tolist() == [0, 1, 0]
    assert np.allclose(forward_stats(t, (c,)), 1 / 3)
    t7 = CountTable(3, 2).extend(abcabbc)
    assert np.allclose(forward_stats(t7, ()), [2 / 7, 3 / 7, 2 / 7])


def test_backward_stats_examples():
    t = CountTable(3, 2).extend([a, b, a, b])
    assert backward_stats(t, (b,)).tolist() == [1, 0, 0]
    assert np.allclose(backward_stats(t, (c,)), 1 / 3)
    with pytest.raises(ValueError):
        backward_stats(CountTable(3, 1), (a,))


def test_backward_root_is_preceding_symbol_frequency():
    seq = [a, b, c, a, b, b, c]
    t = CountTable(3, 2, padding=[c]).extend(seq)
    ctx = [c] + seq[:-1]  # the symbol preceding each counted position
    assert np.allclose(backward_stats(t, ()), np.bincount(ctx, minlength=3) / 7)


def test_reconstruction_small_example():
    t = CountTable(3, 2, padding=[a, a]).extend([a, b, a, b, a])
    path = t.context(1)
    fw = [forward_stats(t, path[:l]) for l in range(2)]
    bw = [backward_stats(t, path[:l]) for l in range(1)]
    rec, seen = reconstruct_counts(fw, bw, path, t.i)
    assert np.allclose(rec, direct_path_counts(t, 1))
    assert seen == [True, True]


@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(0, 3), st.integers(1, 200))
def test_counts_match_brute_force_and_reconstruct(seed, A, D, n):
    rng = np.random.default_rng(seed)
    pad = rng.integers(0, A, size=D + 1).tolist()
    body = rng.integers(0, A, size=n).tolist()
    t = CountTable(A, D + 1, pad).extend(body)
    hist = pad + body
    assert t.total(()) == n
    path = t.context(D)
    for l in range(D + 2):
        s = tuple(hist[-1 - k] for k in range(l))
        want = np.zeros(A, dtype=np.int64)
        for j in range(len(pad), len(hist)):
            if all(hist[j - 1 - k] == s[k] for k in range(l)):
                want[hist[j]] += 1
        assert np.array_equal(t.get(s), want)
    # parent-child conservation with full padding
    for s, vec in t:
        if len(s) < D + 1:
            assert sum(t.total(s + (q,)) for q in range(A)) == vec.sum()
    suffixes = path_suffixes(t.history, D)
    fw = [forward_stats(t, s) for s in suffixes]
    bw = [backward_stats(t, s) for s in suffixes[:-1]]
    rec, _ = reconstruct_counts(fw, bw, path, t.i)
    direct = direct_path_counts(t, D)
    assert np.max(np.abs(rec - direct)) < 1e-9
    for s in suffixes:
        for g in (forward_stats(t, s), backward_stats(t, s)):
            assert np.all(g >= 0) and abs(g.sum() - 1) < 1e-12


@given(st.integers(2, 5), st.lists(st.integers(0, 4), max_size=6))
def test_pack_round_trip(A, s):
    s = tuple(x % A for x in s)
    assert unpack_suffix(pack_suffix(s, A), A) == s


def test_csv_dump_sorted(abcabbc):
    text = CountTable(3, 1).extend(abcabbc).to_csv().splitlines()
    assert text[0] == "suffix,n0,n1,n2"
    assert text[1] == ",2,3,2"
    assert len(text) == 1 + 1 + 3
