import math
import random

import numpy as np
import pytest

from claimkit.lm import Vocab


class TableModel:
    """Hand-built language model: exact context tuple -> {token id: prob}.

    Unknown contexts force EOS so every path terminates.
    """

    def __init__(self, vocab: Vocab, table: dict[tuple[int, ...], dict[int, float]]):
        self.vocab = vocab
        self.table = table

    def next_token_logprobs(self, context):
        row = self.table.get(tuple(context), {self.vocab.eos_id: 1.0})
        out = np.full(len(self.vocab), -np.inf)
        for tok, prob in row.items():
            out[tok] = math.log(prob)
        return out


@pytest.fixture
def two_completion():
    """Three terminal continuations with pinned logprobs for steering tests.

    prompt 'bad' ->  para (-1.0)  |  junk (ln rest)  |  corr (-1.2),
    each followed by a forced EOS.
    """
    vocab = Vocab(tokens=("<pad>", "<bos>", "<eos>", "bad", "corr", "junk", "para"))
    bad, corr, junk, para = 3, 4, 5, 6
    p_para = math.exp(-1.0)
    p_corr = math.exp(-1.2)
    p_junk = 1.0 - p_para - p_corr
    model = TableModel(
        vocab,
        {
            (bad,): {para: p_para, corr: p_corr, junk: p_junk},
            (bad, para): {vocab.eos_id: 1.0},
            (bad, corr): {vocab.eos_id: 1.0},
            (bad, junk): {vocab.eos_id: 1.0},
        },
    )
    diffs = {("para", "bad"): 0.05, ("corr", "bad"): 0.95, ("junk", "bad"): 0.02}
    return model, diffs


def random_ngram_model(seed: int):
    """Seeded random toy model plus a prompt drawn from its own corpus."""
    from claimkit.lm import NgramModel

    rng = random.Random(seed)
    words = [f"w{i}" for i in range(rng.randint(4, 8))]
    texts = [
        " ".join(rng.choice(words) for _ in range(rng.randint(2, 7)))
        for _ in range(rng.randint(3, 10))
    ]
    vocab = Vocab.build(texts + [" ".join(words)])
    order = rng.randint(1, 3)
    alpha = rng.uniform(0.05, 1.0)
    model = NgramModel.train(vocab, texts, order=order, alpha=alpha)
    prompt = " ".join(rng.choice(words) for _ in range(rng.randint(1, 3)))
    return model, prompt, rng


def make_chat_transport(responder):
    """httpx.MockTransport around responder(messages) -> content string."""
    import httpx

    def handle(request: httpx.Request) -> httpx.Response:
        payload = __import__("json").loads(request.content)
        content = responder(payload["messages"])
        return httpx.Response(
            200,
            json={
                "choices": [
                    {"message": {"role": "assistant", "content": content},
                     "finish_reason": "stop"}
                ]
            },
        )

    return httpx.MockTransport(handle)


def _last_user(messages):
    return [m for m in messages if m["role"] == "user"][-1]["content"]


def extract_field(text, label):
    for line in text.splitlines():
        if line.lower().startswith(label.lower()):
            return line[len(label):].strip(" :")
    return ""


def corrupting_responder(messages):
    """Deterministic well-behaved corruption model."""
    query = _last_user(messages)
    if "failed because" in query:
        # Retry turn: the original query is the first user message.
        query = [m for m in messages if m["role"] == "user"][0]["content"]
    claim = extract_field(query, "Correct Claim")
    return (
        f"Incorrect Claim: it is not the case that {claim}\n"
        f"Explanation: the evidence indicates that {claim}\n"
        f"Augmented Claim: indeed, {claim}"
    )


def violating_responder(messages):
    """Always echoes the correct claim back as the incorrect one."""
    query = [m for m in messages if m["role"] == "user"][0]["content"]
    claim = extract_field(query, "Correct Claim")
    return (
        f"Incorrect Claim: {claim}\n"
        f"Explanation: \n"
        f"Augmented Claim: {claim}"
    )


def flaky_then_good_responder(messages):
    """First attempt drops the Explanation label; the retry is compliant."""
    n_user = sum(1 for m in messages if m["role"] == "user")
    if n_user == 1:
        query = _last_user(messages)
        claim = extract_field(query, "Correct Claim")
        return f"Incorrect Claim: it is not the case that {claim}\nAugmented Claim: indeed, {claim}"
    return corrupting_responder(messages)


def judging_responder(messages):
    """Answer False when the claim contains a negation, True otherwise;
    stall once on claims containing 'mumble'."""
    query = _last_user(messages)
    if query.startswith("Respond with exactly"):
        return "Answer: False"
    claim = ""
    for line in query.splitlines():
        if line.startswith("Claim:"):
            claim = line[len("Claim:"):].strip()
    if "mumble" in claim:
        return "the claim seems plausible"
    verdict = "False" if " not " in f" {claim} " else "True"
    return f"Answer: {verdict}"
