"""Character n-gram language identification and group assignment for robust training.

The identifier is a closed-set additive-smoothed character n-gram classifier over
a declared language inventory. Confidences are a softmax over per-character
average log-likelihoods, so sentence length does not saturate the scores.
Groups for robust training are derived from the set of languages whose
confidence clears a threshold: a sentence's group is the bitmask of present
languages, giving up to 2^N groups for N languages.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, GroupedDataset, Sentence

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ConfidenceMap:
    """Per-language confidence scores for one sentence."""

    scores: dict[str, float]
    uniform_fallback: bool = False

    def validate(self, language_order) -> None:
        total = 0.0
        for lang in language_order:
            if lang not in self.scores:
                raise ValueError(f"missing language {lang!r} in confidence map")
            if self.scores[lang] < 0:
                raise ValueError(f"negative confidence for {lang!r}")
            total += self.scores[lang]
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"confidences sum to {total}, expected 1")

    def argmax(self) -> str:
        return max(self.scores, key=lambda k: self.scores[k])


@dataclass(frozen=True)
class GroupAssignment:
    group_id: int
    present_languages: tuple[str, ...]
    strategy: str


def _chars(text: str) -> str:
    """Lowercase and collapse whitespace runs; the scored character stream."""
    return " ".join(text.lower().split())


class Identifier:
    """Per-language character n-gram count tables with additive smoothing.

    Tables cover orders 1..n_max; position t is scored with the longest order
    its left context allows. Probabilities are over the alphabet seen in
    training; characters outside it fall back to the smoothing floor.
    """

    def __init__(self, languages, n_max, alpha, alphabet, counts, context_counts):
        self.languages = tuple(languages)
        self.n_max = n_max
        self.alpha = alpha
        self.alphabet = tuple(alphabet)
        self.counts = counts  # lang -> [dict per order 1..n_max]
        self.context_counts = context_counts
        self._log_floor = math.log(PROB_FLOOR)

    def char_log_prob(self, lang: str, gram: str) -> float:
        """log P(last char of gram | its context) under additive smoothing."""
        order = len(gram)
        cnt = self.counts[lang][order - 1].get(gram, 0)
        ctx = self.context_counts[lang][order - 1].get(gram[:-1], 0)
        denom = ctx + self.alpha * len(self.alphabet)
        if denom <= 0:
            return self._log_floor
        p = (cnt + self.alpha) / denom
        return math.log(p) if p > PROB_FLOOR else self._log_floor

    def sentence_log_likelihoods(self, text: str) -> np.ndarray | None:
        """Length-averaged log-likelihood per language, or None if unscorable."""
        chars = _chars(text)
        if not chars:
            return None
        lls = np.zeros(len(self.languages), dtype=np.float64)
        for t in range(len(chars)):
            order = min(self.n_max, t + 1)
            gram = chars[t - order + 1 : t + 1]
            for i, lang in enumerate(self.languages):
                lls[i] += self.char_log_prob(lang, gram)
        return lls / len(chars)

    def to_dict(self) -> dict:
        return {
            "languages": list(self.languages),
            "n_max": self.n_max,
            "alpha": self.alpha,
            "alphabet": list(self.alphabet),
            "counts": {lang: [dict(d) for d in tables] for lang, tables in self.counts.items()},
            "context_counts": {
                lang: [dict(d) for d in tables] for lang, tables in self.context_counts.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Identifier":
        return cls(
            languages=data["languages"],
            n_max=data["n_max"],
            alpha=data["alpha"],
            alphabet=data["alphabet"],
            counts=data["counts"],
            context_counts=data["context_counts"],
        )


def train_identifier(labeled: list[Corpus], n_max: int = 4, alpha: float = 1.0) -> Identifier:
    """Build n-gram tables from labeled corpora; language order follows input order."""
    if len(labeled) < 2:
        raise ValueError("need at least two labeled corpora")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    tags = [c.language_inventory[0] for c in labeled]
    if len(set(tags)) != len(tags):
        raise ValueError(f"duplicate language tags in {tags}")
    for corpus, tag in zip(labeled, tags):
        if len(corpus) < 50:
            raise ValueError(f"corpus for {tag!r} has {len(corpus)} sentences, need >= 50")

    alphabet = set()
    counts = {}
    context_counts = {}
    for corpus, tag in zip(labeled, tags):
        gram_tables = [dict() for _ in range(n_max)]
        ctx_tables = [dict() for _ in range(n_max)]
        for sent in corpus.sentences:
            chars = _chars(sent.text)
            alphabet.update(chars)
            for t in range(len(chars)):
                for order in range(1, min(n_max, t + 1) + 1):
                    gram = chars[t - order + 1 : t + 1]
                    table = gram_tables[order - 1]
                    table[gram] = table.get(gram, 0) + 1
                    ctx = ctx_tables[order - 1]
                    ctx[gram[:-1]] = ctx.get(gram[:-1], 0) + 1
        counts[tag] = gram_tables
        context_counts[tag] = ctx_tables
    return Identifier(
        languages=tags,
        n_max=n_max,
        alpha=alpha,
        alphabet=sorted(alphabet),
        counts=counts,
        context_counts=context_counts,
    )


def identify(identifier: Identifier, sentence: Sentence | str) -> ConfidenceMap:
    """Softmax-normalized confidence per language; uniform fallback if unscorable."""
    text = sentence.text if isinstance(sentence, Sentence) else sentence
    lls = identifier.sentence_log_likelihoods(text)
    n = len(identifier.languages)
    if lls is None:
        return ConfidenceMap(
            scores={lang: 1.0 / n for lang in identifier.languages},
            uniform_fallback=True,
        )
    shifted = np.exp(lls - lls.max())
    probs = shifted / shifted.sum()
    return ConfidenceMap(scores={lang: float(p) for lang, p in zip(identifier.languages, probs)})


def assign_group(
    conf: ConfidenceMap, threshold: float, language_order: tuple[str, ...] | None = None
) -> GroupAssignment:
    """Bitmask group of the languages whose confidence clears the threshold.

    Bit i corresponds to language_order[i] (default: the map's key order);
    an empty present set maps to group 0.
    """
    if not 0 <= threshold < 1:
        raise ValueError(f"threshold must be in [0,1), got {threshold}")
    if language_order is None:
        language_order = tuple(conf.scores.keys())
    present = []
    group_id = 0
    for i, lang in enumerate(language_order):
        if conf.scores[lang] >= threshold:
            present.append(lang)
            group_id |= 1 << i
    return GroupAssignment(group_id=group_id, present_languages=tuple(present), strategy="language")


def _dense_relabel(raw_ids: list, label_of) -> tuple[list[int], list[str]]:
    """Relabel raw group keys to dense 0..G-1 (ascending raw key order)."""
    keys = sorted(set(raw_ids))
    mapping = {k: i for i, k in enumerate(keys)}
    return [mapping[k] for k in raw_ids], [label_of(k) for k in keys]


def annotate_groups(
    dataset: Corpus,
    identifier: Identifier | None,
    strategy: str,
    group_count: int = 4,
    seed: int = 0,
    threshold: float = 0.001,
) -> GroupedDataset:
    """Assign every sentence a dense group id under one of three strategies.

    one: a single group. random: seeded uniform assignment over group_count
    slots. language: group by source language when the data mixes languages,
    otherwise by the identifier's present-language bitmask. Empty groups are
    dropped by dense relabeling.
    """
    if strategy == "one":
        return GroupedDataset(
            corpus=dataset,
            group_ids=tuple(0 for _ in range(len(dataset))),
            group_count=1,
            strategy="one",
            group_labels=("all",),
        )
    if strategy == "random":
        if group_count < 1:
            raise ValueError("group_count must be >= 1")
        rng = np.random.default_rng(seed)
        raw = rng.integers(0, group_count, size=len(dataset)).tolist()
        dense, labels = _dense_relabel(raw, lambda k: f"random:{k}")
        return GroupedDataset(
            corpus=dataset,
            group_ids=tuple(dense),
            group_count=len(labels),
            strategy="random",
            group_labels=tuple(labels),
        )
    if strategy == "language":
        tags = [s.source_language for s in dataset.sentences]
        if len(set(tags)) > 1:
            order = {tag: i for i, tag in enumerate(dataset.language_inventory)}
            raw = [(order.get(t, len(order)), t) for t in tags]
            dense, labels = _dense_relabel(raw, lambda k: k[1])
        else:
            if identifier is None:
                raise ValueError(
                    "strategy=language on single-language data requires an identifier"
                )
            raw = []
            for sent in dataset.sentences:
                conf = identify(identifier, sent)
                raw.append(assign_group(conf, threshold, identifier.languages).group_id)

            def label_of(mask):
                present = [lang for i, lang in enumerate(identifier.languages) if mask & (1 << i)]
                return "+".join(present) if present else "none"

            dense, labels = _dense_relabel(raw, label_of)
        return GroupedDataset(
            corpus=dataset,
            group_ids=tuple(dense),
            group_count=len(labels),
            strategy="language",
            group_labels=tuple(labels),
        )
    raise ValueError(f"unknown grouping strategy {strategy!r}")


N_HIST_BINS = 20


@dataclass
class LanguageDistributionReport:
    """Per-language histogram of confidence scores over a dataset."""

    languages: tuple[str, ...]
    bin_counts: dict[str, np.ndarray] = field(default_factory=dict)
    present_counts: dict[str, int] = field(default_factory=dict)
    n_sentences: int = 0

    def to_tsv(self) -> str:
        lines = ["language\tbin_lo\tbin_hi\tcount"]
        for lang in self.languages:
            counts = self.bin_counts[lang]
            for b in range(N_HIST_BINS):
                lo = b / N_HIST_BINS
                hi = (b + 1) / N_HIST_BINS
                lines.append(f"{lang}\t{lo:.2f}\t{hi:.2f}\t{int(counts[b])}")
        return "\n".join(lines) + "\n"


def language_distribution_report(
    dataset: Corpus, identifier: Identifier, threshold: float = 0.001
) -> LanguageDistributionReport:
    """Histogram identifier confidences over the dataset (20 equal bins on [0,1])."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    report = LanguageDistributionReport(languages=identifier.languages)
    for lang in identifier.languages:
        report.bin_counts[lang] = np.zeros(N_HIST_BINS, dtype=np.int64)
        report.present_counts[lang] = 0
    for sent in dataset.sentences:
        conf = identify(identifier, sent)
        for lang in identifier.languages:
            score = conf.scores[lang]
            b = min(int(score * N_HIST_BINS), N_HIST_BINS - 1)
            report.bin_counts[lang][b] += 1
            if score >= threshold:
                report.present_counts[lang] += 1
    report.n_sentences = len(dataset)
    return report
