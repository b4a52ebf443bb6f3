"""Greedy Poisson rejection sampling: exact samplers and one-shot codecs.

The package simulates samples from a target distribution Q using only draws
from a proposal P and the density ratio dQ/dP, by running candidates through
a Poisson process race against a "stretch" of the time axis.  The accepted
candidate's index admits a short prefix-free code, which turns the sampler
into a one-shot channel-simulation codec.  Parallel and branch-and-bound
variants trade compute layout and runtime for the same output law.
"""

__version__ = "0.1.0"
