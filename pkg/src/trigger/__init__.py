"""
Learning trigger
"""
from .learning_trigger import (
    LearningTrigger,
    TriggerConfig,
    TriggerDecision,
    evaluate_trigger,
    model_truth_bound,
)
