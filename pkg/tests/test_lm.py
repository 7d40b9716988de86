import math

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimkit.lm import (
    LmError,
    NgramModel,
    RemoteLm,
    Vocab,
    greedy_rollout,
    sequence_logprob,
)

from .conftest import TableModel, random_ngram_model


class TestVocab:
    def test_build_sorts_and_reserves_specials(self):
        v = Vocab.build(["b a", "a c"])
        assert v.tokens == ("<pad>", "<bos>", "<eos>", "a", "b", "c")
        assert (v.pad_id, v.bos_id, v.eos_id) == (0, 1, 2)

    def test_duplicate_tokens_rejected(self):
        with pytest.raises(LmError):
            Vocab(tokens=("<pad>", "<bos>", "<eos>", "a", "a"))

    def test_encode_decode(self):
        v = Vocab.build(["a b"])
        ids = v.encode("a b")
        assert v.decode(ids + [v.eos_id]) == "a b"

    def test_encode_unknown_token(self):
        v = Vocab.build(["a"])
        with pytest.raises(LmError):
            v.encode("z")


class TestNgramModel:
    def test_unigram_add_one_arithmetic(self):
        # corpus "aab": counts a:2 b:1 eos:1 over |V|=5 with alpha=1
        # -> P(a)=3/9, P(b)=2/9, P(eos)=2/9, P(pad)=P(bos)=1/9
        vocab = Vocab.build(["a a b"])
        model = NgramModel.train(vocab, ["a a b"], order=1, alpha=1.0)
        probs = np.exp(model.next_token_logprobs([]))
        a, b = vocab.tokens.index("a"), vocab.tokens.index("b")
        assert probs[a] == pytest.approx(3 / 9, abs=1e-12)
        assert probs[b] == pytest.approx(2 / 9, abs=1e-12)
        assert probs[vocab.eos_id] == pytest.approx(2 / 9, abs=1e-12)
        assert probs[vocab.pad_id] == pytest.approx(1 / 9, abs=1e-12)
        assert probs.sum() == pytest.approx(1.0, abs=1e-9)

    def test_empty_context_bigram_conditions_on_bos(self):
        vocab = Vocab.build(["a b"])
        model = NgramModel.train(vocab, ["a b"], order=2, alpha=1.0)
        # context (<bos>,) saw only "a": P(a) = (1+1)/(1+5) = 1/3, others 1/6
        probs = np.exp(model.next_token_logprobs([]))
        a = vocab.tokens.index("a")
        assert probs[a] == pytest.approx(2 / 6, abs=1e-12)
        assert probs[vocab.eos_id] == pytest.approx(1 / 6, abs=1e-12)

    def test_normalized_within_tolerance(self):
        vocab = Vocab.build(["x y z y x"])
        model = NgramModel.train(vocab, ["x y z y x", "y z"], order=3, alpha=0.3)
        for ctx in ([], [3], [3, 4], [4, 5, 3]):
            lse = np.logaddexp.reduce(model.next_token_logprobs(ctx))
            assert abs(lse) < 1e-6

    def test_unknown_token_id_rejected(self):
        vocab = Vocab.build(["a"])
        model = NgramModel.train(vocab, ["a"], order=2)
        with pytest.raises(LmError):
            model.next_token_logprobs([99])

    def test_determinism(self):
        vocab = Vocab.build(["a b c"])
        model = NgramModel.train(vocab, ["a b c"], order=2, alpha=0.5)
        one = model.next_token_logprobs([3, 4])
        two = model.next_token_logprobs([3, 4])
        assert np.array_equal(one, two)

    def test_save_load_roundtrip(self, tmp_path):
        vocab = Vocab.build(["a b c a"])
        model = NgramModel.train(vocab, ["a b c a", "c b"], order=2, alpha=0.7)
        path = tmp_path / "model.json"
        model.save(path)
        loaded = NgramModel.load(path)
        assert loaded.vocab == model.vocab
        assert loaded.counts == model.counts
        assert np.array_equal(
            loaded.next_token_logprobs([3]), model.next_token_logprobs([3])
        )


class TestSequenceLogprob:
    def test_forced_single_path_is_zero(self):
        vocab = Vocab(tokens=("<pad>", "<bos>", "<eos>", "a"))
        model = TableModel(vocab, {(): {3: 1.0}, (3,): {vocab.eos_id: 1.0}})
        assert sequence_logprob(model, [3, vocab.eos_id]) == pytest.approx(0.0)

    def test_two_token_hand_table(self):
        vocab = Vocab(tokens=("<pad>", "<bos>", "<eos>", "a", "b"))
        model = TableModel(
            vocab,
            {(): {3: 0.25, 4: 0.75}, (3,): {4: 0.5, vocab.eos_id: 0.5}},
        )
        got = sequence_logprob(model, [3, 4], allow_unfinished=True)
        assert got == pytest.approx(math.log(0.25) + math.log(0.5), abs=1e-12)

    def test_requires_eos_unless_allowed(self):
        vocab = Vocab(tokens=("<pad>", "<bos>", "<eos>", "a"))
        model = TableModel(vocab, {(): {3: 1.0}})
        with pytest.raises(LmError):
            sequence_logprob(model, [3])

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), split=st.integers(1, 4))
    def test_concatenation_additivity(self, seed, split):
        model, _, rng = random_ngram_model(seed)
        n_words = len(model.vocab) - 3
        tokens = [3 + rng.randrange(n_words) for _ in range(6)]
        split = min(split, len(tokens) - 1)
        whole = sequence_logprob(model, tokens, allow_unfinished=True)
        left = sequence_logprob(model, tokens[:split], allow_unfinished=True)
        # conditional part computed independently, step by step
        cond = 0.0
        for i in range(split, len(tokens)):
            cond += float(model.next_token_logprobs(tokens[:i])[tokens[i]])
        assert whole == pytest.approx(left + cond, abs=1e-9)


class TestGreedyRollout:
    def test_prefix_ending_in_eos_unchanged(self):
        vocab = Vocab.build(["a"])
        model = NgramModel.train(vocab, ["a"], order=1)
        prefix = [3, vocab.eos_id]
        assert greedy_rollout(model, prefix, 10) == prefix

    def test_deterministic_chain(self):
        vocab = Vocab(tokens=("<pad>", "<bos>", "<eos>", "a", "b"))
        model = TableModel(
            vocab,
            {(): {3: 0.9, 4: 0.1}, (3,): {4: 0.9, 3: 0.1}, (3, 4): {vocab.eos_id: 1.0}},
        )
        assert greedy_rollout(model, [], 10) == [3, 4, vocab.eos_id]

    def test_tie_breaks_to_lower_id(self):
        vocab = Vocab(tokens=("<pad>", "<bos>", "<eos>", "a", "b"))
        model = TableModel(vocab, {(): {3: 0.5, 4: 0.5}, (3,): {vocab.eos_id: 1.0}})
        assert greedy_rollout(model, [], 10)[0] == 3

    def test_max_len_caps_total_length(self):
        vocab = Vocab(tokens=("<pad>", "<bos>", "<eos>", "a"))
        model = TableModel(vocab, {(): {3: 1.0}, (3,): {3: 1.0}, (3, 3): {3: 1.0}})
        out = greedy_rollout(model, [], 3)
        assert len(out) == 3

    def test_max_len_below_prefix_rejected(self):
        vocab = Vocab.build(["a"])
        model = NgramModel.train(vocab, ["a"], order=1)
        with pytest.raises(LmError):
            greedy_rollout(model, [3, 3], 1)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_local_argmax_property(self, seed):
        model, prompt, _ = random_ngram_model(seed)
        prefix = model.vocab.encode(prompt)
        out = greedy_rollout(model, prefix, len(prefix) + 5)
        for i in range(len(prefix), len(out)):
            logprobs = model.next_token_logprobs(out[:i])
            assert logprobs[out[i]] >= logprobs.max() - 1e-12


class TestRemoteLm:
    def _vocab(self):
        return Vocab(tokens=("<pad>", "<bos>", "<eos>", "a", "b"))

    def test_full_topk_passthrough(self):
        vocab = self._vocab()
        served = [math.log(p) for p in (0.1, 0.05, 0.15, 0.5, 0.2)]

        def handle(request: httpx.Request) -> httpx.Response:
            assert request.url.path == "/v1/logprobs"
            return httpx.Response(
                200,
                json={"topk": [[i, lp] for i, lp in enumerate(served)], "rest_mass": 0.0},
            )

        lm = RemoteLm(vocab, base_url="http://mock", transport=httpx.MockTransport(handle))
        got = lm.next_token_logprobs([3])
        assert np.allclose(got, np.array(served), atol=0)

    def test_rest_mass_spread_over_uncovered(self):
        vocab = self._vocab()

        def handle(request):
            return httpx.Response(
                200,
                json={"topk": [[3, math.log(0.5)], [4, math.log(0.3)]], "rest_mass": 0.2},
            )

        lm = RemoteLm(vocab, base_url="http://mock", transport=httpx.MockTransport(handle))
        probs = np.exp(lm.next_token_logprobs([]))
        assert probs[3] == pytest.approx(0.5, abs=1e-9)
        assert probs[0] == pytest.approx(0.2 / 3, abs=1e-9)
        assert probs.sum() == pytest.approx(1.0, abs=1e-9)

    def test_generate_endpoint(self):
        vocab = self._vocab()

        def handle(request):
            assert request.url.path == "/v1/generate"
            return httpx.Response(200, json={"token_ids": [3, 4, 2]})

        lm = RemoteLm(vocab, base_url="http://mock", transport=httpx.MockTransport(handle))
        assert lm.generate([3], 8) == [3, 4, 2]

    def test_http_error_surfaces_as_lm_error(self):
        vocab = self._vocab()

        def handle(request):
            return httpx.Response(500, text="boom")

        lm = RemoteLm(vocab, base_url="http://mock", transport=httpx.MockTransport(handle))
        with pytest.raises(LmError):
            lm.next_token_logprobs([])

    def test_requires_base_url(self, monkeypatch):
        monkeypatch.delenv("LM_BASE_URL", raising=False)
        with pytest.raises(LmError):
            RemoteLm(self._vocab())
