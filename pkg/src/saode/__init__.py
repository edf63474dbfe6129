"""Seasonal averaged one-dependence estimators for multi-label text streams."""

__version__ = "0.1.0"

from .classifiers import AODE, SAODE, ModelConfig, NaiveBayes, build_model, load_model, save_model
from .counts import AttributeSchema, Instance, make_store
from .prequential import RunConfig, compare_runs, run_prequential

__all__ = [
    "AODE",
    "SAODE",
    "NaiveBayes",
    "ModelConfig",
    "build_model",
    "load_model",
    "save_model",
    "AttributeSchema",
    "Instance",
    "make_store",
    "RunConfig",
    "run_prequential",
    "compare_runs",
]
