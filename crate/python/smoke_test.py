"""Smoke test for the sharepref_py extension.

Build first, e.g. `maturin develop -m crates/python/Cargo.toml`, or
`cargo build -p sharepref-python --features extension-module --release`
and put target/release/libsharepref_py.so on the path as sharepref_py.so.
"""

import os
import sys
import tempfile

import sharepref_py as sp


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    assert close(sp.jaccard(["a", "b"], ["b", "c"]), 1 / 3)
    assert sp.jaccard([], []) == 0.0

    likes = [("u", "a"), ("f1", "a"), ("f1", "b"), ("f1", "c"), ("f2", "a"), ("f2", "c")]
    recs = sp.recommend("u", ["f1", "f2"], likes, k=20, n=10)
    assert [i for i, _ in recs] == ["c", "b"], recs
    assert all(0.0 <= s <= 1.0 for _, s in recs)

    w = sp.welch_t((301, 4.18, 0.95), (665, 3.70, 1.11))
    assert 6.8 <= w["t"] <= 7.1 and abs(w["df"] - 671) < 10, w
    assert round(sp.cohens_d((90, 4.16, 0.87), (89, 3.56, 1.05)), 1) == 0.6
    assert sp.pooled_t((10, 1.0, 1.0), (10, 1.0, 1.0))["t"] == 0.0

    assert sp.share_probability(0.1, 1.0) == 0.0
    assert close(sp.share_probability(1.0, 0.0), 0.7310585786300049)
    try:
        sp.share_probability(0.5, 0.5, sender_weight=0.5, recipient_weight=1.0)
        raise AssertionError("expected ValueError")
    except ValueError:
        pass

    tree = sp.DecisionTree.from_text(
        "sharer_sim <= 0.0101: Non-shared\n"
        "sharer_sim > 0.0101\n"
        "| sharer_prom <= 1: Non-shared\n"
        "| sharer_prom > 1: Shared\n"
    )
    assert tree.depth() == 2
    assert tree.predict([0.5, 0, 0, 2, 7, 1e6]) is True
    assert tree.predict([0.0101, 0, 0, 9, 7, 1e6]) is False

    rows = []
    for p in range(8):
        for m in range(8):
            c = (p + m) % 2 == 0
            rows.append((3.0 + (1.0 if c else 0.0) + 0.1 * p - 0.05 * m + 0.3 * ((p * 7 + m * 3) % 5 - 2), f"p{p}", f"m{m}", c))
    fit = sp.lmm_test(rows)
    assert abs(fit["condition"] - 1.0) < 0.2 and fit["p"] < 0.01, fit

    with tempfile.TemporaryDirectory() as d:
        out = os.path.join(d, "study")
        sent = sp.synth(out, seed=3, overrides={"n_pairs": "20", "n_background": "300"})
        assert sent > 0
        assert {"likes.csv", "ratings.csv", "shares.csv", "items.csv", "sessions.csv"} <= set(os.listdir(out))
        try:
            sp.synth(out, overrides={"n_pairs": "0"})
            raise AssertionError("expected ValueError")
        except ValueError:
            pass

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
