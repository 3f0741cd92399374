"""Perceptual-bias templates from noise labeling, and SVMs that use them.

The package estimates an observer's internal decision template by
reverse-correlating their yes/no answers to pure visual noise, and then
uses that template as a geometric prior — a second-order-cone constraint
on the weight vector — when training linear classifiers with little or
shifted data.

Layers, bottom up: ``rng`` (seed discipline), ``exact`` (error-free
vector sums), ``features`` (feature spaces, noise, HOG, rendering),
``revcorr`` (trial records and estimators), ``observer`` (simulated
labelers), ``conesvm`` (projection, solver, oracle), ``evaluation``
(AP and experiment runners), ``session``/``server`` (crowd labeling
over HTTP), ``cli`` (pipeline driver).
"""

__version__ = "0.1.0"

from .errors import EstimationError, InputError, SpaceMismatchError
from .features import (EXTERNAL, HOG, RAW_PIXEL, FeatureSpace, FeatureVector,
                       GrayImage, cosine, dot, extract_hog, l2_normalize,
                       read_vector_jsonl, render_for_labeling, render_glyph,
                       render_pixel, sample_white_noise, vector_record,
                       write_vector_jsonl)
from .revcorr import (CLASS_A, CLASS_B, MODE_CLASSIC, MODE_NOISE_ONLY,
                      Template, TemplateAccumulator, TrialRecord, accumulate,
                      estimate_classic, estimate_cohorts, estimate_noise_only,
                      iter_trial_log, merge, read_trial_log,
                      reconstruct_stimulus, write_trial_log)
from .observer import (CatchItem, LinearObserver, decide, respond,
                       run_session, run_stimulus_session)
from .conesvm import (ConeConstraint, LabeledExample, SolverReport, SvmModel,
                      cone_residual, fit_cone_svm, fit_svm, grid_optimum_2d,
                      model_from_dict, model_from_json, model_to_dict,
                      model_to_json, objective, predict, project_to_cone)
from .evaluation import (APResult, ConditionResult, ExperimentReport,
                         LabeledVector, ScoredLabel, SyntheticDatasetSpec,
                         average_precision, chance_ap, eval_model,
                         eval_template, generate_synthetic,
                         run_cross_dataset_experiment, run_low_data_experiment)
from .session import (CatchSource, LabelingSession, QualificationRule,
                      SessionConfig, Stimulus, list_sessions)

__all__ = [name for name in dir() if not name.startswith("_")]
