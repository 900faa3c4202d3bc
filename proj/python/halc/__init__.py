"""Focal-contrast decoding over a synthetic captioning world.

Scenes, corpora and configurations are plain dicts; the native module
exchanges them as JSON.
"""

import json

from . import _core
from ._core import (
    ConfigError,
    InvalidInput,
    InvalidParameter,
    IoError,
    c_e_closed_form,
    c_g_estimate,
    contrast_distribution,
    corpus_bleu,
    expand_fov,
    f_beta_score,
    jsd,
    softmax,
    total_variation,
)

__version__ = _core.__version__


def _dump(config):
    if config is None:
        return ""
    return config if isinstance(config, str) else json.dumps(config)


def demo_scene():
    return json.loads(_core.demo_scene())


def generate_corpus(seed, config=None):
    """Scenes of a generated corpus; `config` may override the "corpus" section."""
    return json.loads(_core.generate_corpus(seed, _dump(config)))["scenes"]


def decode(scene, method="halc", config=None, seed=0):
    """Decode one scene with "greedy", "beam" or "halc"; returns tokens and the trace."""
    return json.loads(_core.decode(json.dumps(scene), method, _dump(config), seed))


def evaluate(captions, corpus, config=None, seed=0):
    """CHAIR, OPOPE and BLEU for one token list per scene."""
    return json.loads(_core.evaluate(captions, json.dumps({"scenes": corpus}), _dump(config), seed))


def cost_estimate(config=None):
    return _core.cost_estimate(_dump(config))


def normalize_config(config=None):
    """The full configuration with defaults filled in."""
    return json.loads(_core.normalize_config(_dump(config)))


def run_scenario(config):
    """Output files of a scenario run, keyed by file name."""
    return _core.run_scenario(_dump(config))


def write_outputs(out_dir, config):
    _core.write_outputs(str(out_dir), _dump(config))


__all__ = [
    "ConfigError",
    "InvalidInput",
    "InvalidParameter",
    "IoError",
    "c_e_closed_form",
    "c_g_estimate",
    "contrast_distribution",
    "corpus_bleu",
    "cost_estimate",
    "decode",
    "demo_scene",
    "evaluate",
    "expand_fov",
    "f_beta_score",
    "generate_corpus",
    "jsd",
    "normalize_config",
    "run_scenario",
    "softmax",
    "total_variation",
    "write_outputs",
]
