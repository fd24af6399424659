# frac_volterra - fractional Volterra equations, weighted spaces and certified bounds

__version__ = "1.0.0"
