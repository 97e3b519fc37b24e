"""Fairness audits of classifiers under missing-data handling and train/test scenarios.

Modules:
  core      Dataset, schema-driven CSV ingestion, sparse-row filtering
  synth     synthetic biased data with missingness (``els-like`` preset)
  impute    simple, KNN and chained-equation multiple imputation
  split     random/stratified/proportional splits, scenarios, test perturbation
  models    logistic regression, CART, random forest, linear SVC
  fairness  one-vs-rest group fairness gaps
  runner    config-driven audits, summaries and report files
  cli       ``fairaudit`` command line
"""

__version__ = "0.1.0"

from .core import ColumnSchema, Dataset, ingest_csv, load_csv, load_schema
from .errors import (
    ConfigError,
    DegenerateLabelsError,
    EmptyDatasetError,
    FairAuditError,
    IncompatibleSchemaError,
    ParseError,
    SchemaError,
    UnfittableColumnError,
)
from .fairness import NOTIONS, one_vs_rest_report, statistical_parity
from .impute import KNNSpec, MultipleSpec, SimpleSpec
from .models import ModelSpec
from .runner import AuditConfig, load_config, run_audit, summarize
from .split import ScenarioSpec, build_scenario
from .synth import SynthConfig, els_like, generate, inject_missing, make_dataset
