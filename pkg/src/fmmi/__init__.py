"""Universal erasure and list decoding: exponents, optimal weightings, simulation."""

__version__ = "0.1.0"
