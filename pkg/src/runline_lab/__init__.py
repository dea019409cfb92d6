"""runline-lab: baseball outcome models, strength analysis, ensembles and run-line backtests."""

__version__ = "0.1.0"
