"""Forecast a country-level governance index from a panel of indicators.

Predictors are chosen by EDR similarity to the target, a second-order boosted
tree ensemble maps them to the target, and ARIMA paths for the chosen
predictors drive the multi-year forecast.
"""
__version__ = "0.1.0"
