"""Numerical toolkit for f-norm ergodicity of continuous-time Markov processes."""

__version__ = "0.1.0"
