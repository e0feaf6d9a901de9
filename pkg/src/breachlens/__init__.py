"""breachlens: e-commerce breach analytics from raw incident records to forecasts."""

__version__ = "0.1.0"
