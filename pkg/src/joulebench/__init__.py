"""joulebench: energy-efficiency benchmarking for LLM serving endpoints.

Drives an OpenAI-compatible completions endpoint with warm-up plus burst (or
fixed-rate) request loads, samples pluggable power sources on a fixed interval
while the requests are in flight, integrates the samples to joules, and
derives energy-per-request, load-sweep, plateau, size-scaling, and CO2eq
metrics. Ships a deterministic mock backend so the whole pipeline can be
exercised and verified without GPUs.
"""

__version__ = "0.1.0"
