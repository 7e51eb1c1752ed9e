"""Figures from ttsa experiment artifacts.

Reads only the published artifact formats (trace CSVs, summary JSON,
sweep JSON) — never the library that produced them.
"""

from ttsa_plots.figures import FigureSpec, render

__version__ = "0.1.0"
