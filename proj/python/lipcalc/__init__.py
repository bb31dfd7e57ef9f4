"""Python front end for the lipcalc toolkit.

Spaces are opaque handles; fields are plain sequences of floats indexed like
the space's points. JSON-valued arguments (space specs, experiment overrides)
accept ordinary dicts.
"""

import json as _json

from ._lipcalc import (  # noqa: F401
    Error,
    MetricSpace,
    __version__,
    adjugate,
    assouad_embed,
    ball,
    build_net,
    change_of_variables,
    distortion_audit,
    doubling_stats,
    experiment_ids,
    global_lip,
    hajlasz_gradient,
    hajlasz_inf_oracle,
    hajlasz_p2_oracle,
    lip_profile,
    liplip_ratio,
    locate_simplex,
    mcshane_extend,
    orthogonalize,
    replay,
    set_thread_count,
    space_from_coords,
    space_from_distances,
)
from . import _lipcalc


def generate_space(spec):
    """Build a space from a spec dict such as {"kind": "path_graph", "count": 5}."""
    return _lipcalc.generate_space(_json.dumps(spec))


def run_experiment(experiment_id, out_dir, overrides=None, seed=0):
    """Run a registered experiment and return its manifest as a dict."""
    text = _lipcalc.run_experiment(experiment_id, _json.dumps(overrides) if overrides else "", seed, str(out_dir))
    return _json.loads(text)
