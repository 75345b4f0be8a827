from ._minipac import (
    FRAME_HEIGHT,
    FRAME_WIDTH,
    REWARD_VALUES,
    Action,
    CellClass,
    ConsolidationMode,
    EnsembleModel,
    EnsemblePrediction,
    Env,
    EnvConfig,
    GameState,
    ModelConfig,
    PlannerConfig,
    ReplayBuffer,
    UnifiedPrediction,
    apply_corrections,
    consolidate,
    encode_input,
    plan_learned,
    plan_perfect,
)

__all__ = [
    "FRAME_HEIGHT",
    "FRAME_WIDTH",
    "REWARD_VALUES",
    "Action",
    "CellClass",
    "ConsolidationMode",
    "EnsembleModel",
    "EnsemblePrediction",
    "Env",
    "EnvConfig",
    "GameState",
    "ModelConfig",
    "PlannerConfig",
    "ReplayBuffer",
    "UnifiedPrediction",
    "apply_corrections",
    "consolidate",
    "encode_input",
    "plan_learned",
    "plan_perfect",
]
