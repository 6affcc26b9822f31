"""Learning to quantify: estimate class prevalence in unlabelled samples."""

from ._quantkit import (
    ClassRates,
    PrevalenceVector,
    QuantkitError,
    TextQuantifier,
    TTestVerdict,
    absolute_error,
    acc_quantify,
    cc_quantify,
    default_grid,
    emq_quantify,
    generate_indices,
    grid_for,
    hdy_quantify,
    hellinger_distance,
    is_stop_word,
    mlpe_quantify,
    pacc_quantify,
    paired_ttest,
    pcc_quantify,
    protocol_samples,
    relative_absolute_error,
    round_count,
    smooth,
    student_t_two_sided,
    tokenize,
)

__all__ = [
    "ClassRates",
    "PrevalenceVector",
    "QuantkitError",
    "TextQuantifier",
    "TTestVerdict",
    "absolute_error",
    "acc_quantify",
    "cc_quantify",
    "default_grid",
    "emq_quantify",
    "generate_indices",
    "grid_for",
    "hdy_quantify",
    "hellinger_distance",
    "is_stop_word",
    "mlpe_quantify",
    "pacc_quantify",
    "paired_ttest",
    "pcc_quantify",
    "protocol_samples",
    "relative_absolute_error",
    "round_count",
    "smooth",
    "student_t_two_sided",
    "tokenize",
]

__version__ = "0.1.0"
