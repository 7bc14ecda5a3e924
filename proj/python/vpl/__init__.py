"""Python interface to the vpl pseudo-labeling pipeline.

Dict/JSON convenience wrappers around the native ``_vpl`` module.
"""

import json

from . import _vpl
from ._vpl import (
    BackendError,
    Error,
    ParseError,
    ProtocolError,
    ValidationError,
    binary_mask,
    corner_to_norm_center,
    format_prompt,
    iou,
    norm_center_to_corner,
    parse_verdict,
    sha256_hex,
    split_scenario,
)

__version__ = _vpl.__version__
DEFAULT_TAU = _vpl.DEFAULT_TAU


def _text(doc):
    return doc if isinstance(doc, str) else json.dumps(doc)


def normalize_coco(doc):
    """Parse a COCO document (str or dict) and return the canonical dict."""
    return json.loads(_vpl.normalize_coco(_text(doc)))


def extract_pseudo_gts(detector_output, tau=DEFAULT_TAU, *, width, height):
    """Pseudo GTs (list of dicts) from one detector-output document."""
    return json.loads(_vpl.extract_pseudo_gts(_text(detector_output), tau, width, height))


def evaluate(gt, results, mode="voc", max_dets=100):
    """Evaluate COCO-style results ``[{image_id, category_id, bbox, score}]``."""
    rows = [(str(r["image_id"]), int(r["category_id"]), [float(v) for v in r["bbox"]], float(r["score"]))
            for r in results]
    return json.loads(_vpl.evaluate(_text(gt), rows, mode, max_dets))


def simulate(seed=0, scenario="5+5+5+5", images_per_task=20, tau=DEFAULT_TAU, flip_prob=0.05, jobs=1):
    """Run both pseudo-labeling arms on a synthetic world; returns the result dict."""
    return json.loads(_vpl.simulate(seed, scenario, images_per_task, tau, flip_prob, jobs))


def check_request_fixture(endpoint, request, expect_accepted):
    """'' when the native validators agree with the expectation, else the mismatch."""
    return _vpl.check_request_fixture(endpoint, _text(request), expect_accepted)


def run_cli(*args):
    """Run the ``vpl`` command line in-process; returns (exit_code, stdout, stderr)."""
    return _vpl.run_cli([str(a) for a in args])
