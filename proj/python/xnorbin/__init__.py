"""Python bindings for the xnorbin accelerator model.

JSON-producing calls (stats, energy reports) are decoded into dicts here.
"""

import json

from ._xnorbin import (
    ControlStream,
    FeatureMap,
    Model,
    XnorbinError,
    alexnet_shaped_model,
    analytic_cycles,
    compile,
    decode_bipolar,
    dot16,
    encode_bipolar,
    fold_bn_threshold,
    forward_ref,
    gen_random_input,
    gen_random_model,
    load_model,
    peak_throughput,
    save_model,
)
from . import _xnorbin


def simulate(cs, fmap):
    """Run a compiled control stream; returns (output FeatureMap, stats dict)."""
    out, stats = _xnorbin.simulate(cs, fmap)
    return out, json.loads(stats)


def stats_closed_form(model):
    return json.loads(_xnorbin.stats_closed_form(model))


def estimate(stats, coeffs, frequency_hz):
    """stats: dict with a "total" block; coeffs: dict or path to a coefficient file."""
    if not isinstance(coeffs, dict):
        with open(coeffs) as f:
            coeffs = json.load(f)
    return json.loads(_xnorbin.estimate(json.dumps(stats), json.dumps(coeffs), frequency_hz))


__all__ = [
    "ControlStream", "FeatureMap", "Model", "XnorbinError", "alexnet_shaped_model", "analytic_cycles",
    "compile", "decode_bipolar", "dot16", "encode_bipolar", "estimate", "fold_bn_threshold", "forward_ref",
    "gen_random_input", "gen_random_model", "load_model", "peak_throughput", "save_model", "simulate",
    "stats_closed_form",
]
