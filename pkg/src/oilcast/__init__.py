"""Forecasting toolkit for monthly indicator panels.

Groups correlated indicator series with k-means under correlation
distance, compresses each group with Gaussian kernel PCA, and forecasts
the target with a kernel extreme learning machine. Ships univariate
baselines, Granger-causality screening, evaluation metrics, a seeded
synthetic panel generator, and a batch CLI.
"""

__version__ = "0.1.0"
