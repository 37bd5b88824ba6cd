"""Analysis: attention, divergence, masking and accuracy diagnostics as CSV data."""

from maskd.analysis.accuracy import AccuracyResult, answer_accuracy
from maskd.analysis.attention import (
    AttentionCurve,
    SalientMassCurve,
    mean_visual_attention_map,
    salient_mass_curve,
    visual_attention_curve,
    visual_fractions,
)
from maskd.analysis.decay import DEFAULT_INTERVALS, IntervalKLProfile, bucket_index, bucket_means, interval_kl_decay
from maskd.analysis.export import (
    write_accuracy_csv,
    write_curve_csv,
    write_histogram_csv,
    write_map_csv,
    write_mass_curve_csv,
    write_profile_csv,
)
from maskd.analysis.histogram import load_diagnostics, masked_distance_histogram

__all__ = [
    # Attention
    "AttentionCurve",
    "visual_fractions",
    "visual_attention_curve",
    "mean_visual_attention_map",
    "SalientMassCurve",
    "salient_mass_curve",
    # Divergence
    "IntervalKLProfile",
    "DEFAULT_INTERVALS",
    "bucket_index",
    "bucket_means",
    "interval_kl_decay",
    # Masking
    "load_diagnostics",
    "masked_distance_histogram",
    # Accuracy
    "AccuracyResult",
    "answer_accuracy",
    # Export
    "write_curve_csv",
    "write_profile_csv",
    "write_histogram_csv",
    "write_map_csv",
    "write_accuracy_csv",
    "write_mass_curve_csv",
]
