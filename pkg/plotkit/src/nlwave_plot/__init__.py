"""Figure renderer for the wavefunction-model CSV outputs.

Reads one CSV produced by the nlwave CLI and writes one image. The CSV
is the only interface to the simulation package; nothing here imports
it. Six plot kinds cover the standard figures: spin trace, twin
divergence, running-max divergence, determinant series, exponent
estimator series, and the coupling scan.
"""

from .render import KINDS, PlotDataError, PlotSpec, read_table, render

__all__ = ["KINDS", "PlotDataError", "PlotSpec", "read_table", "render"]

__version__ = "0.1.0"
