"""maskd - attention-guided masked knowledge distillation at desk scale.

A numpy autodiff engine and a small causal transformer, plus the pieces
that distill one such model into another while hiding the reasoning
prefixes the student leans on most.

Usage:
    from maskd.corpus import CorpusParams, gen_corpus, load_corpus
    from maskd.distill import DistillConfig, run_training

For sub-modules:
    from maskd.masking import select_salient_prefixes, build_salient_mask
    from maskd.budget import self_paced_thresholds, tokenwise_reverse_kl
    from maskd.analysis import visual_attention_curve, interval_kl_decay
"""

__version__ = "0.1.0"
