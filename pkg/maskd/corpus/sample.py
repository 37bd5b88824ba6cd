"""Two-hop key-value lookups whose reasoning traces plant a textual shortcut.

The visual span is a shuffled fact table of (key, value) pairs; the question
names a start key. For a two-hop sample the start key maps to a second key,
which maps to the answer value. The think segment scans the table keys once
per hop, each scan opening with the key it looks for and closing with that
key and what it found:

    visual:   k1 k2  k2 v  kx vx ...      (shuffled pairs)
    question: <q2> k1
    response: <think> <q2> k1 | k1 keys.. k1 k2 | k2 keys.. k2 | </think> <answer> v <end>

The first scan restates the first hop (k1 -> k2) and the second scan stops
before writing its find, so k2 can be copied from the text alone while v
appears only in the fact table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from maskd.corpus.vocab import BEGIN_ANSWER, BEGIN_THINK, DEFAULT_VOCAB, END, END_THINK, VocabSpec
from maskd.types import ConfigError


class CorpusParams(BaseModel):
    """Shape of generated samples."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_facts: int = Field(default=6, description="Facts in each table")
    hops: int = Field(default=2, description="Lookup depth, 1 or 2")

    @model_validator(mode="after")
    def _check(self) -> CorpusParams:
        if self.hops not in (1, 2):
            raise ConfigError(f"hops in {{1, 2}} required (got {self.hops})")
        if self.n_facts < self.hops:
            raise ConfigError(f"n_facts >= hops required (got n_facts={self.n_facts}, hops={self.hops})")
        return self


@dataclass(frozen=True)
class TaskSample:
    visual_tokens: tuple[int, ...]
    question_tokens: tuple[int, ...]
    gold_trace: tuple[int, ...]
    answer_token: int
    hops: int


def response_length(params: CorpusParams) -> int:
    """Closed-form response length: 3 opening, n_facts + 2 per scan, one written find, 4 closing."""
    return params.hops * (params.n_facts + 2) + 8


def gen_sample(rng: np.random.Generator, params: CorpusParams, vocab: VocabSpec = DEFAULT_VOCAB) -> TaskSample:
    """Draw one sample from ``rng``.

    Raises:
        ConfigError: If the table needs more distinct keys than the vocabulary has
    """
    if params.n_facts > len(vocab.keys):
        raise ConfigError(f"n_facts <= {len(vocab.keys)} distinct keys required (got {params.n_facts})")
    if len(vocab.values) < 1:
        raise ConfigError("vocabulary has no value symbols")

    keys = [int(k) for k in rng.choice(np.array(vocab.keys), size=params.n_facts, replace=False)]
    values = [int(v) for v in rng.choice(np.array(vocab.values), size=params.n_facts, replace=True)]
    table = dict(zip(keys, values, strict=True))

    start = keys[0]
    if params.hops == 2:
        found = keys[1]
        table[start] = found
        answer = table[found]
    else:
        found = answer = table[start]

    order = rng.permutation(params.n_facts)
    listed = [keys[i] for i in order]
    visual = tuple(tok for k in listed for tok in (k, table[k]))
    question = (vocab.query_for(params.hops), start)
    scans = [start, *listed, start, found]
    if params.hops == 2:
        scans += [found, *listed, found]
    trace = (BEGIN_THINK, *question, *scans, END_THINK, BEGIN_ANSWER, answer, END)
    return TaskSample(
        visual_tokens=visual, question_tokens=question, gold_trace=trace, answer_token=answer, hops=params.hops
    )


def lookup_answer(
    visual: tuple[int, ...] | list[int], question: tuple[int, ...] | list[int], vocab: VocabSpec = DEFAULT_VOCAB
) -> int:
    """Resolve the answer from the fact table and question alone."""
    table = {visual[i]: visual[i + 1] for i in range(0, len(visual), 2)}
    hops = 1 if question[0] == vocab.query_for(1) else 2
    token = question[1]
    for _ in range(hops):
        token = table[token]
    return token
