"""Corpus ingestion, dataset mixing, and deterministic train/dev splitting.

Plaintext corpora are one sentence per line. Mixed datasets combine a creole
corpus with auxiliary corpora in its influential languages; the dev split of a
mixed dataset is drawn from the creole sentences only.
"""

from dataclasses import dataclass, field

import numpy as np

CREOLE_PREFIX = "creole:"


class CorpusFormatError(ValueError):
    """Malformed input file (carries a line number where possible)."""


@dataclass(frozen=True)
class Sentence:
    text: str
    source_language: str
    sent_id: int


@dataclass(frozen=True)
class Corpus:
    name: str
    sentences: tuple[Sentence, ...]
    language_inventory: tuple[str, ...]

    def __post_init__(self):
        if not self.sentences:
            raise ValueError(f"corpus {self.name!r} is empty")

    def __len__(self) -> int:
        return len(self.sentences)

    def texts(self) -> list[str]:
        return [s.text for s in self.sentences]

    def is_creole_tagged(self) -> bool:
        return any(s.source_language.startswith(CREOLE_PREFIX) for s in self.sentences)


@dataclass(frozen=True)
class GroupedDataset:
    """A corpus whose sentences carry dense group ids 0..group_count-1."""

    corpus: Corpus
    group_ids: tuple[int, ...]
    group_count: int
    strategy: str
    group_labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.group_ids) != len(self.corpus):
            raise ValueError("group_ids length does not match corpus size")
        if self.group_count != len(self.group_labels):
            raise ValueError("group_labels length does not match group_count")
        ids = set(self.group_ids)
        if ids and (min(ids) < 0 or max(ids) >= self.group_count):
            raise ValueError("group ids are not dense in [0, group_count)")

    def __len__(self) -> int:
        return len(self.corpus)


@dataclass(frozen=True)
class MixPolicy:
    """How auxiliary languages are folded into a mixed dataset."""

    target_per_language: int | None = None  # None: use creole corpus size
    scarce_fraction: float = 0.95
    dev_ratio: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.dev_ratio < 1:
            raise ValueError(f"dev_ratio must be in (0,1), got {self.dev_ratio}")
        if not 0 < self.scarce_fraction <= 1:
            raise ValueError(f"scarce_fraction must be in (0,1], got {self.scarce_fraction}")


@dataclass(frozen=True)
class DictionarySet:
    """Lowercased single-word entries; membership is case-insensitive exact match."""

    words: frozenset[str]
    name: str

    def __post_init__(self):
        if not self.words:
            raise ValueError(f"dictionary {self.name!r} is empty")

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.words

    def __len__(self) -> int:
        return len(self.words)


@dataclass(frozen=True)
class TaggedCorpus:
    """Token/label sequences for tagging tasks (UPOS or BIO-NER)."""

    sequences: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]
    tagset: frozenset[str]
    scheme: str
    bio_repairs: int = 0

    def __post_init__(self):
        if self.scheme not in ("UPOS", "BIO-NER"):
            raise ValueError(f"unknown tag scheme {self.scheme!r}")
        for tokens, labels in self.sequences:
            if len(tokens) != len(labels):
                raise ValueError("tokens/labels length mismatch")

    def __len__(self) -> int:
        return len(self.sequences)


def _read_utf8_lines(path) -> list[str]:
    """Read lines, reporting invalid UTF-8 with its 1-based line number."""
    with open(path, "rb") as fh:
        raw = fh.read()
    lines = raw.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    out = []
    for i, line in enumerate(lines, start=1):
        try:
            out.append(line.decode("utf-8").rstrip("\r"))
        except UnicodeDecodeError as exc:
            raise CorpusFormatError(f"{path}: invalid UTF-8 on line {i}") from exc
    return out


def load_plaintext_corpus(path, language_tag: str, name: str | None = None) -> Corpus:
    """Load a one-sentence-per-line UTF-8 file; blank lines are skipped.

    Internal tabs are collapsed to spaces so sentences stay TSV-safe.
    """
    lines = _read_utf8_lines(path)
    sentences = []
    for line in lines:
        text = " ".join(line.split())
        if not text:
            continue
        sentences.append(Sentence(text=text, source_language=language_tag, sent_id=len(sentences)))
    if not sentences:
        raise CorpusFormatError(f"{path}: no non-blank lines")
    return Corpus(
        name=name or str(path),
        sentences=tuple(sentences),
        language_inventory=(language_tag,),
    )


def load_dictionary(path, name: str | None = None) -> DictionarySet:
    """Load a one-entry-per-line dictionary; entries are lowercased and deduplicated."""
    words = set()
    for i, line in enumerate(_read_utf8_lines(path), start=1):
        entry = line.strip()
        if not entry:
            continue
        if any(ch.isspace() for ch in entry):
            raise CorpusFormatError(f"{path}: entry with internal whitespace on line {i}")
        words.add(entry.lower())
    if not words:
        raise CorpusFormatError(f"{path}: dictionary file has no entries")
    return DictionarySet(words=frozenset(words), name=name or str(path))


def _repair_bio(labels: list[str]) -> tuple[list[str], int]:
    """Promote orphan I-X labels (no preceding B-X/I-X of the same type) to B-X."""
    repaired = []
    repairs = 0
    prev = "O"
    for lab in labels:
        if lab.startswith("I-"):
            typ = lab[2:]
            if not (prev == "B-" + typ or prev == "I-" + typ):
                lab = "B-" + typ
                repairs += 1
        repaired.append(lab)
        prev = lab
    return repaired, repairs


def load_tagged_corpus(path, scheme: str) -> TaggedCorpus:
    """Parse a CoNLL-style file: "token<TAB>label" lines, blank line between sequences."""
    if scheme not in ("UPOS", "BIO-NER"):
        raise ValueError(f"unknown tag scheme {scheme!r}")
    sequences = []
    tokens, labels = [], []
    repairs = 0

    def flush():
        nonlocal tokens, labels, repairs
        if tokens:
            if scheme == "BIO-NER":
                fixed, n = _repair_bio(labels)
                labels = fixed
                repairs += n
            sequences.append((tuple(tokens), tuple(labels)))
        tokens, labels = [], []

    for i, line in enumerate(_read_utf8_lines(path), start=1):
        if not line.strip():
            flush()
            continue
        if line.count("\t") != 1:
            raise CorpusFormatError(f"{path}: expected one tab on line {i}")
        token, label = line.split("\t")
        token, label = token.strip(), label.strip()
        if not token or not label:
            raise CorpusFormatError(f"{path}: empty token or label on line {i}")
        tokens.append(token)
        labels.append(label)
    flush()
    if not sequences:
        raise CorpusFormatError(f"{path}: no sequences found")
    tagset = frozenset(lab for _, labs in sequences for lab in labs)
    return TaggedCorpus(sequences=tuple(sequences), tagset=tagset, scheme=scheme, bio_repairs=repairs)


def aux_take_count(available: int, target: int, scarce_fraction: float) -> int:
    """Per-language take: min(target, floor(scarce_fraction * available))."""
    return min(target, int(np.floor(scarce_fraction * available)))


def build_mixed_dataset(creole: Corpus, aux: list[Corpus], policy: MixPolicy) -> Corpus:
    """Combine the full creole corpus with seeded uniform samples of each aux corpus.

    Each aux language contributes min(target, floor(scarce_fraction * available))
    sentences, sampled without replacement. Sentences keep their source language;
    ids are reassigned densely in output order (creole first, then aux in order).
    """
    target = policy.target_per_language if policy.target_per_language is not None else len(creole)
    if target <= 0:
        raise ValueError("target_per_language must be positive")
    creole_tags = set(s.source_language for s in creole.sentences)
    seen_tags = set(creole_tags)
    for corpus in aux:
        tags = set(s.source_language for s in corpus.sentences)
        if tags & seen_tags:
            raise ValueError(f"aux corpus {corpus.name!r} reuses language tag(s) {sorted(tags & seen_tags)}")
        seen_tags |= tags

    rng = np.random.default_rng(policy.seed)
    picked = [(s.text, s.source_language) for s in creole.sentences]
    inventory = list(creole.language_inventory)
    for corpus in aux:
        take = aux_take_count(len(corpus), target, policy.scarce_fraction)
        idx = np.sort(rng.choice(len(corpus), size=take, replace=False))
        picked.extend((corpus.sentences[i].text, corpus.sentences[i].source_language) for i in idx)
        for tag in corpus.language_inventory:
            if tag not in inventory:
                inventory.append(tag)

    sentences = tuple(
        Sentence(text=text, source_language=tag, sent_id=i) for i, (text, tag) in enumerate(picked)
    )
    return Corpus(name=f"{creole.name}+mixed", sentences=sentences, language_inventory=tuple(inventory))


def split_train_dev(corpus: Corpus, dev_ratio: float, seed: int) -> tuple[Corpus, Corpus]:
    """Deterministic train/dev partition.

    If the corpus carries creole-tagged sentences, the dev set is restricted to
    them and sized from the creole subset; otherwise the whole corpus is split.
    Relative sentence order is preserved in both halves.
    """
    if not 0 < dev_ratio < 1:
        raise ValueError(f"dev_ratio must be in (0,1), got {dev_ratio}")
    if len(corpus) < 2:
        raise ValueError("corpus too small to split")

    if corpus.is_creole_tagged():
        pool = [s.sent_id for s in corpus.sentences if s.source_language.startswith(CREOLE_PREFIX)]
    else:
        pool = [s.sent_id for s in corpus.sentences]
    dev_size = round(dev_ratio * len(pool))
    if dev_size < 1:
        raise ValueError(f"dev split would be empty (pool {len(pool)}, ratio {dev_ratio})")
    if dev_size >= len(corpus):
        raise ValueError("dev split would consume the whole corpus")

    rng = np.random.default_rng(seed)
    shuffled = rng.permutation(len(pool))
    dev_ids = set(pool[i] for i in shuffled[:dev_size])

    def subset(keep_ids, name):
        kept = [s for s in corpus.sentences if s.sent_id in keep_ids]
        sentences = tuple(
            Sentence(text=s.text, source_language=s.source_language, sent_id=i)
            for i, s in enumerate(kept)
        )
        return Corpus(name=name, sentences=sentences, language_inventory=corpus.language_inventory)

    train_ids = set(s.sent_id for s in corpus.sentences) - dev_ids
    return (
        subset(train_ids, f"{corpus.name}/train"),
        subset(dev_ids, f"{corpus.name}/dev"),
    )


def save_dataset_tsv(path, corpus: Corpus, group_ids=None) -> None:
    """Persist as TSV: text<TAB>source_language<TAB>group_id (-1 before grouping)."""
    if group_ids is None:
        group_ids = [-1] * len(corpus)
    if len(group_ids) != len(corpus):
        raise ValueError("group_ids length does not match corpus size")
    with open(path, "w", encoding="utf-8") as fh:
        for sent, gid in zip(corpus.sentences, group_ids):
            fh.write(f"{sent.text}\t{sent.source_language}\t{gid}\n")


def load_dataset_tsv(path, name: str | None = None) -> tuple[Corpus, list[int]]:
    """Load a dataset TSV back into a Corpus plus its group id column."""
    sentences = []
    group_ids = []
    inventory = []
    for i, line in enumerate(_read_utf8_lines(path), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise CorpusFormatError(f"{path}: expected 3 tab-separated fields on line {i}")
        text, tag, gid = parts
        sentences.append(Sentence(text=text, source_language=tag, sent_id=len(sentences)))
        group_ids.append(int(gid))
        if tag not in inventory:
            inventory.append(tag)
    if not sentences:
        raise CorpusFormatError(f"{path}: no rows")
    corpus = Corpus(name=name or str(path), sentences=tuple(sentences), language_inventory=tuple(inventory))
    return corpus, group_ids
