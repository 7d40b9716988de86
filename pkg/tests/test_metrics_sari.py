import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimkit.metrics import MetricError, sari
from claimkit.textnorm import tokenize

from .sari_oracle import oracle_sari

# Hand-enumerable (source, prediction, references) cases spanning the
# add/keep/delete branches, zero-denominator corners, short sequences,
# and multi-reference disagreement.
ORACLE_CASES = [
    ("the cat sat on the mat", "the cat sat on the mat", ["the cat sat on the mat"]),
    ("the cat sat", "the the the", ["the dog sat"]),
    ("a b c", "a b c", ["a b c", "a b d"]),
    ("a b c d e", "a c e", ["a c e"]),
    ("a", "a", ["a"]),
    ("a", "b", ["b"]),
    ("a", "b", ["c"]),
    ("a b", "b a", ["a b"]),
    ("a b", "a b c", ["a b c"]),
    ("a b c", "d e f", ["d e f"]),
    ("a b c", "d e f", ["g h i"]),
    ("x y z w", "x y z w", ["x y", "z w"]),
    ("x y", "x", ["x"]),
    ("x y", "y", ["x y"]),
    ("p q r s", "p q r s t", ["p q r s t", "p q r s"]),
    ("one two three four five", "one three five", ["one three five", "one two five"]),
    ("red green", "red blue", ["red blue", "red green"]),
    ("to be or not to be", "to be", ["to be"]),
    ("alpha beta gamma", "alpha beta gamma delta", ["alpha beta gamma delta epsilon"]),
    ("m n", "m n o p q", ["m n o", "n o p"]),
    ("s t u v", "s u t v", ["s t u v"]),
    ("k", "k k", ["k"]),
    ("a a a a", "a", ["a a"]),
    ("u v w", "u v w", ["u v w", "u v w", "x y z"]),
    ("long claim with many words here", "short claim", ["short claim", "tiny claim"]),
    ("c1 c2 c3 c4 c5 c6", "c1 c2 c9 c4 c5 c6", ["c1 c2 c9 c4 c5 c6"]),
    ("n1 n2", "n2 n1 n3", ["n3 n1 n2"]),
]


class TestSariOracleSuite:
    @pytest.mark.parametrize("case", ORACLE_CASES, ids=range(len(ORACLE_CASES)))
    def test_matches_bruteforce(self, case):
        source, pred, refs = case
        got = sari(tokenize(source), tokenize(pred), [tokenize(r) for r in refs])
        expected = oracle_sari(tokenize(source), tokenize(pred), [tokenize(r) for r in refs])
        assert got.sari == pytest.approx(expected, abs=1e-9)

    def test_identity_scores_exactly_100(self):
        toks = tokenize("the cat sat on the mat")
        assert sari(toks, toks, [toks]).sari == 100.0

    def test_cat_fixture_value(self):
        # Frozen from the oracle: n=1 (0 + 2/3 + 1/2)/3, n=2 and n=3 2/3, n=4 1.
        got = sari(tokenize("the cat sat"), tokenize("the the the"), [tokenize("the dog sat")])
        expected = 100.0 * ((7.0 / 18.0) + (2.0 / 3.0) + (2.0 / 3.0) + 1.0) / 4.0
        assert got.sari == pytest.approx(expected, abs=1e-9)

    def test_components_within_bounds(self):
        got = sari(tokenize("a b c"), tokenize("a d"), [tokenize("a d c")])
        for comp in got.per_n.values():
            assert 0.0 <= comp.f_add <= 1.0
            assert 0.0 <= comp.f_keep <= 1.0
            assert 0.0 <= comp.p_del <= 1.0
        assert 0.0 <= got.sari <= 100.0

    def test_empty_references_error(self):
        with pytest.raises(MetricError):
            sari(["a"], ["a"], [])


class TestSariInversion:
    """A semantically wrong prediction can outscore a correct paraphrase."""

    def test_meaning_flip_beats_paraphrase(self):
        source = tokenize("X does not affect Y")
        ref = tokenize("X does not affect Y")
        pred_wrong = tokenize("X has an affect on Y")
        pred_paraphrase = tokenize(
            "in every respect that was measured, Y remains unaffected by X"
        )
        s_wrong = sari(source, pred_wrong, [ref]).sari
        s_para = sari(source, pred_paraphrase, [ref]).sari
        assert s_wrong > s_para


_token = st.sampled_from(["a", "b", "c", "d", "e"])
_sentence = st.lists(_token, min_size=1, max_size=6)


@settings(max_examples=60, deadline=None)
@given(
    src=_sentence,
    pred=_sentence,
    refs=st.lists(_sentence, min_size=2, max_size=4),
)
def test_reference_permutation_invariance(src, pred, refs):
    forward = sari(src, pred, refs).sari
    backward = sari(src, pred, list(reversed(refs))).sari
    assert forward == pytest.approx(backward, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    src=_sentence,
    pred=_sentence,
    refs=st.lists(_sentence, min_size=1, max_size=3),
)
def test_duplicating_all_references_is_noop(src, pred, refs):
    once = sari(src, pred, refs).sari
    twice = sari(src, pred, refs + refs).sari
    assert once == pytest.approx(twice, abs=1e-12)
