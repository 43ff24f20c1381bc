"""Number-theoretic toolkit for linear congruential generators and the
in-context algorithms sequence models learn to predict them."""

__version__ = "0.1.0"

from .lcg_core import (LcgParams, LcgState, FoldedParams, lcg_next, lcg_sequence, fold_params,
                       period, hull_dobell, enumerate_full_period_params)
from .rns import (Factorization, RnsDigits, factorize, to_digits, from_digits,
                  digit_period_theory, reduced_digit_period, measure_digit_period)
from .predictor import (PredictionOutcome, CrackResult, estimate_modulus_greedy,
                        predict_copy_only, predict_full, predict_unseen, crack_known_m,
                        crack_unknown_m)
from .tokenizer import (TokenizerSpec, TokenStream, to_base_b, from_base_b, tokenize_sequence,
                        detokenize_stream)
from .evaluate import (AccuracyReport, ScalingFit, per_position_accuracy, per_digit_accuracy,
                       product_law_check, context_to_threshold, fit_power_law)

__all__ = [
    "LcgParams", "LcgState", "FoldedParams", "lcg_next", "lcg_sequence", "fold_params", "period",
    "hull_dobell", "enumerate_full_period_params",
    "Factorization", "RnsDigits", "factorize", "to_digits", "from_digits", "digit_period_theory",
    "reduced_digit_period", "measure_digit_period",
    "PredictionOutcome", "CrackResult", "estimate_modulus_greedy", "predict_copy_only",
    "predict_full", "predict_unseen", "crack_known_m", "crack_unknown_m",
    "TokenizerSpec", "TokenStream", "to_base_b", "from_base_b", "tokenize_sequence",
    "detokenize_stream",
    "AccuracyReport", "ScalingFit", "per_position_accuracy", "per_digit_accuracy",
    "product_law_check", "context_to_threshold", "fit_power_law",
]
