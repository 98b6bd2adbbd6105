"""Typed errors for the deep trainer.

Every anticipated failure raises one of these (or FileNotFoundError for a
missing input path) so callers can distinguish bad inputs from bugs.
"""

from __future__ import annotations


class TrainerError(Exception):
    """Base class for all trainer failures."""


class ConfigError(TrainerError):
    """Invalid run configuration: unknown mode, a (mode, division) pair with
    no published hyperparameter row, out-of-range values, or a missing
    weight source for a mode that needs one."""


class SchemaMismatch(TrainerError):
    """An input file does not have the expected structure: wrong manifest
    header, malformed split file, weight archive with the wrong topology,
    or a split that references images the manifest does not list."""


class LeakageDetected(TrainerError):
    """A pretraining manifest contains benchmark-dataset segments.

    Pretraining corpora must stay disjoint from the evaluation dataset;
    any overlap would leak test material into the pretrained weights."""
