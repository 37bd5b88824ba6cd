"""Token vocabulary of the lookup corpus.

Ids 0..6 are specials and query markers; keys and values follow in two
disjoint blocks. Any value token is distinguishable from any key token, so
a trace reveals whether a hop has been resolved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

PAD = 0
BEGIN_THINK = 1
END_THINK = 2
BEGIN_ANSWER = 3
END = 4
QUERY_ONE_HOP = 5
QUERY_TWO_HOP = 6

SPECIAL_NAMES = ("<pad>", "<think>", "</think>", "<answer>", "<end>")
QUERY_NAMES = ("<q1>", "<q2>")

DEFAULT_VOCAB_SIZE = 64
DEFAULT_KEY_COUNT = 28


@dataclass(frozen=True)
class VocabSpec:
    """Id blocks of the corpus vocabulary."""

    size: int = DEFAULT_VOCAB_SIZE
    key_count: int = DEFAULT_KEY_COUNT

    @property
    def first_key(self) -> int:
        return len(SPECIAL_NAMES) + len(QUERY_NAMES)

    @property
    def keys(self) -> range:
        return range(self.first_key, self.first_key + self.key_count)

    @property
    def values(self) -> range:
        return range(self.keys.stop, self.size)

    def query_for(self, hops: int) -> int:
        return QUERY_ONE_HOP if hops == 1 else QUERY_TWO_HOP

    def is_key(self, token: int) -> bool:
        return token in self.keys

    def is_value(self, token: int) -> bool:
        return token in self.values

    def names(self) -> list[str]:
        """Symbol name for every id, in id order."""
        keys = [f"k{i:02d}" for i in range(len(self.keys))]
        values = [f"v{i:02d}" for i in range(len(self.values))]
        return [*SPECIAL_NAMES, *QUERY_NAMES, *keys, *values]

    def render(self, tokens: list[int]) -> str:
        names = self.names()
        return " ".join(names[t] for t in tokens)

    def write_sidecar(self, path: Path) -> Path:
        path.write_text(json.dumps({"size": self.size, "names": self.names()}, indent=2) + "\n")
        return path


def sidecar_path(corpus_path: Path) -> Path:
    return corpus_path.with_name(corpus_path.name + ".vocab.json")


DEFAULT_VOCAB = VocabSpec()
