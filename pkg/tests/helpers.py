import random


class TableScorer:
    """Relevance scorer answering from a text -> score dict, counting calls."""

    descriptor = "table"

    def __init__(self, table):
        self.table = dict(table)
        self.calls = []

    def score(self, query, text):
        self.calls.append(text)
        return self.table[text]


def random_document(rng: random.Random, n_sentences: int):
    """Sentences with unique leading tags so every span has distinct text."""
    words = ["alpha", "beta", "gamma", "delta", "omega", "sigma", "kappa", "zeta"]
    sentences = []
    for i in range(n_sentences):
        body = " ".join(rng.choice(words) for _ in range(rng.randint(1, 12)))
        sentences.append(f"S{i} {body}.")
    return sentences
