"""Corpus: synthetic fact-table lookups with shortcut-bearing reasoning traces.

Usage:
    from maskd.corpus import CorpusParams, gen_corpus, layout_of, load_corpus

    gen_corpus(1000, seed=0, params=CorpusParams(), path=Path("corpus.jsonl"))
    records = load_corpus(Path("corpus.jsonl"), split="train")
    seq = layout_of(records[0])
"""

from maskd.corpus.oracles import think_only_answer, think_only_first_hop, think_segment, visual_lookup
from maskd.corpus.records import (
    TRAIN_FRACTION,
    CorpusRecord,
    CorpusSummary,
    answer_slot,
    file_sha256,
    gen_corpus,
    layout_of,
    load_corpus,
    split_sizes,
    write_records,
)
from maskd.corpus.sample import CorpusParams, TaskSample, gen_sample, lookup_answer, response_length
from maskd.corpus.vocab import DEFAULT_VOCAB, VocabSpec, sidecar_path

__all__ = [
    # Vocabulary
    "VocabSpec",
    "DEFAULT_VOCAB",
    "sidecar_path",
    # Samples
    "CorpusParams",
    "TaskSample",
    "gen_sample",
    "lookup_answer",
    "response_length",
    # Files
    "CorpusRecord",
    "CorpusSummary",
    "TRAIN_FRACTION",
    "gen_corpus",
    "load_corpus",
    "write_records",
    "split_sizes",
    "file_sha256",
    "layout_of",
    "answer_slot",
    # Oracles
    "think_segment",
    "think_only_first_hop",
    "think_only_answer",
    "visual_lookup",
]
