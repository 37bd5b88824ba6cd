"""Reference predictors that expose the corpus's textual shortcut.

think_only_first_hop reads nothing but the think segment; visual_lookup
reads nothing but the fact table and question.
"""

from __future__ import annotations

from maskd.corpus.records import CorpusRecord
from maskd.corpus.sample import lookup_answer
from maskd.corpus.vocab import DEFAULT_VOCAB, END_THINK, VocabSpec


def think_segment(response: list[int]) -> list[int]:
    """Response tokens strictly before </think>."""
    return response[: response.index(END_THINK)] if END_THINK in response else list(response)


def think_only_first_hop(think: list[int]) -> int | None:
    """Recover the first hop by copying: the last scan closes on it."""
    return think[-1] if len(think) > 3 else None


def think_only_answer(think: list[int], vocab: VocabSpec = DEFAULT_VOCAB) -> int | None:
    """Best text-only guess for the final answer: the last value token seen in the think segment."""
    for token in reversed(think):
        if vocab.is_value(token):
            return token
    return None


def visual_lookup(record: CorpusRecord, vocab: VocabSpec = DEFAULT_VOCAB) -> int:
    return lookup_answer(record.visual, record.question, vocab)
