"""Figure rendering for sweep result CSVs.

This package talks to the experiment harness only through its CSV schema;
it never imports the library that produced the files.  All plotted values
come straight from the CSV; the only statistic recomputed here is the
origin-anchored collapse fit that collapse plots annotate.
"""

from sweep_plots.render import (
    FIGURE_KINDS,
    PlotSpec,
    SchemaError,
    collapse_stats,
    read_records,
    render,
)

__all__ = [
    "FIGURE_KINDS",
    "PlotSpec",
    "SchemaError",
    "collapse_stats",
    "read_records",
    "render",
]

__version__ = "0.1.0"
