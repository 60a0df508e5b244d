"""Python bindings for the fcdistill C++ core.

Scenario and pipeline configurations cross the boundary as JSON text, so the
same files drive the CLI and Python.
"""

import json

from ._core import (  # noqa: F401
    ConverterParams,
    Dataset,
    DivergenceError,
    Exogenous,
    FeatureVector,
    MlpModel,
    MpcConfig,
    PlantState,
    SwitchMode,
    Topology,
    beam_decide,
    bench_decision_time,
    buck_discrete_step,
    buck_s1_json,
    buck_s2_json,
    build_id,
    canonical_s1_json,
    default_pipeline_config_json,
    discrete_step,
    exhaustive_decide,
    generate_dataset,
    init_mlp,
    load_dataset,
    load_model,
    mode_coefficients,
    nominal_params,
    perturb_params,
    run_expert_episode,
    run_student_episode,
    sample_scenario_json,
    stage_cost,
    train_offline,
)


def pipeline_config(**overrides):
    """Default pipeline configuration as a dict, with top-level overrides."""
    cfg = json.loads(default_pipeline_config_json())
    cfg.update(overrides)
    return cfg


def scenario(kind="S1", seed=0):
    """Scenario dict: the canonical S1 or a seeded S2/S3 draw."""
    if kind == "S1":
        return json.loads(canonical_s1_json())
    return json.loads(sample_scenario_json(kind, seed))
