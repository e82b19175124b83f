"""Disclosure-risk estimation for categorical microdata."""

from ._core import (  # noqa: F401
    ContingencyTable,
    Error,
    InputError,
    KeySchema,
    cell_risk_closed_form,
    estimate,
    ingest_microdata,
    ipf_fit,
    marginal_cell_loglik,
    oracle,
    partition_log_prior,
    run,
    run_config_hash,
    sample_uniques,
    synth_sample,
    true_risks,
)

__all__ = [name for name in dir() if not name.startswith("_")]
