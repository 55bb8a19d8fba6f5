"""Figures for nonholo trajectory CSV files.

Consumes only the documented CSV schema:

    t,xi_0..xi_{n-1},mu_0..mu_{n-1},a_0..a_{m-1},energy,
    res_constraint,res_dirac,res_advection
"""

from .cli import KINDS, PlotJob, SchemaError, load_table, main, plot

__all__ = ["KINDS", "PlotJob", "SchemaError", "load_table", "main", "plot"]
__version__ = "1.0.0"
