"""Word-level vocabulary over whitespace-tokenized, lowercased text.

Reserved ids: PAD=0, UNK=1, MASK=2. Word-level tokens keep dictionary-restricted
masking exact at the word level.
"""

from collections import Counter
from dataclasses import dataclass

from ..corpus import Corpus

PAD_ID = 0
UNK_ID = 1
MASK_ID = 2
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
MASK_TOKEN = "<mask>"
N_RESERVED = 3
RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, MASK_TOKEN)


@dataclass(frozen=True)
class Vocab:
    token_to_id: dict[str, int]
    id_to_token: tuple[str, ...]
    max_size: int
    min_count: int

    def __len__(self) -> int:
        return len(self.id_to_token)

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token.lower(), UNK_ID)

    def token(self, idx: int) -> str:
        return self.id_to_token[idx]


def build_vocab(corpus: Corpus, max_size: int = 8000, min_count: int = 1) -> Vocab:
    """Count whitespace tokens; keep count >= min_count, ranked by count then token."""
    if max_size < N_RESERVED + 1:
        raise ValueError(f"max_size must be >= {N_RESERVED + 1}")
    counts = Counter()
    for sent in corpus.sentences:
        counts.update(sent.text.lower().split())
    ranked = sorted(
        (tok for tok, c in counts.items() if c >= min_count),
        key=lambda tok: (-counts[tok], tok),
    )
    kept = ranked[: max_size - N_RESERVED]
    id_to_token = RESERVED_TOKENS + tuple(kept)
    token_to_id = {tok: i for i, tok in enumerate(id_to_token)}
    return Vocab(
        token_to_id=token_to_id,
        id_to_token=id_to_token,
        max_size=max_size,
        min_count=min_count,
    )


def tokenize(vocab: Vocab, text: str, max_len: int | None = None) -> list[int]:
    """Lowercase, split on whitespace, map with UNK fallback, truncate to max_len."""
    ids = [vocab.lookup(tok) for tok in text.lower().split()]
    if max_len is not None:
        ids = ids[:max_len]
    return ids


def save_vocab(path, vocab: Vocab) -> None:
    """One token per line, in id order."""
    with open(path, "w", encoding="utf-8") as fh:
        for tok in vocab.id_to_token:
            fh.write(tok + "\n")


def load_vocab(path, max_size: int | None = None, min_count: int = 1) -> Vocab:
    with open(path, encoding="utf-8") as fh:
        tokens = [line.rstrip("\n") for line in fh]
    tokens = [t for t in tokens if t]
    if tuple(tokens[:N_RESERVED]) != RESERVED_TOKENS:
        raise ValueError(f"{path}: expected reserved tokens {RESERVED_TOKENS} first")
    id_to_token = tuple(tokens)
    return Vocab(
        token_to_id={tok: i for i, tok in enumerate(id_to_token)},
        id_to_token=id_to_token,
        max_size=max_size if max_size is not None else len(id_to_token),
        min_count=min_count,
    )
