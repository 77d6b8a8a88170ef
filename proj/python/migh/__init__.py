"""Harmonization of decennial census migration tables."""

from ._core import (
    MighError,
    Registry,
    Table,
    communities,
    conservation_check,
    generate,
    impute_missing_destination,
    inflow_share,
    load_registry,
    network_metrics,
    read_table,
    redistribute_duration,
    redistribute_unclassifiable,
    round_largest_remainder,
    run_pipeline,
    summarize,
    synth_registry,
    synthesize_totals,
    weight_vector,
    write_registry,
    write_table,
)

__all__ = [name for name in dir() if not name.startswith("_")]
