"""Fisher memory analysis, non-normal recurrent initializers, and
long-memory RNN training benchmarks."""

__version__ = "0.1.0"
