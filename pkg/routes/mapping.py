"""
Mapping routes module
This module exposes decomposition, mapping and evaluation over a JSON API.
"""
import logging

from flask import Blueprint, jsonify, request

import config
from services.evaluator import EvalConfig, MakespanEvaluator, result_to_dict
from services.mappers import ALGORITHMS, EXTRA_ALGORITHMS, mapping_from_dict, mapping_to_dict, run_algorithm
from services.platform import get_default_platform, platform_from_dict
from services.spdag import decompose, forest_to_dict
from services.taskgraph import graph_from_dict, normalize_endpoints

logger = logging.getLogger(__name__)

mapping_bp = Blueprint('mapping', __name__)


def _payload():
    body = request.get_json(silent=True)
    if not isinstance(body, dict):
        raise ValueError("Request body must be a JSON object")
    if "graph" not in body:
        raise ValueError("Request body needs a 'graph'")
    return body


def _platform(body):
    if body.get("platform") is not None:
        return platform_from_dict(body["platform"])
    return get_default_platform()


def _error(e: Exception):
    return jsonify({'success': False, 'error': str(e)}), 400


@mapping_bp.route('/api/health')
def api_health():
    return jsonify({'success': True, 'status': 'ok'})


@mapping_bp.route('/api/algorithms')
def api_algorithms():
    """
    API endpoint listing the registered mapping algorithms
    """
    return jsonify({
        'success': True,
        'algorithms': sorted(ALGORITHMS),
        'extra_algorithms': sorted(EXTRA_ALGORITHMS),
    })


@mapping_bp.route('/api/decompose', methods=['POST'])
def api_decompose():
    """
    API endpoint decomposing a task graph into series-parallel trees

    Request JSON:
        - graph: native graph document
        - seed (optional): seed of the random cut rule
        - cut_rule (optional): 'random' or 'smallest-outsize-first'
    """
    try:
        body = _payload()
        g = graph_from_dict(body["graph"])
        normalized, start, _ = normalize_endpoints(g, config.DEFAULT_EDGE_BYTES)
        forest = decompose(normalized, start, body.get("cut_rule", config.CUT_RULE),
                           int(body.get("seed", config.DEFAULT_SEED)))
        return jsonify({'success': True, 'tree_count': len(forest), 'forest': forest_to_dict(forest)})
    except ValueError as e:
        logger.error(f"Error decomposing graph: {e}")
        return _error(e)


@mapping_bp.route('/api/map', methods=['POST'])
def api_map():
    """
    API endpoint running one mapping algorithm

    Request JSON:
        - graph: native graph document
        - platform (optional): platform document, default platform otherwise
        - algorithm: registry name
        - seed (optional), gamma (optional)
    """
    try:
        body = _payload()
        g = graph_from_dict(body["graph"])
        platform = _platform(body)
        seed = int(body.get("seed", config.DEFAULT_SEED))
        result = run_algorithm(body.get("algorithm", "sp_firstfit"), g, platform, seed=seed,
                               eval_cfg=EvalConfig(seed=seed), gamma=float(body.get("gamma", config.GAMMA)))
        return jsonify({
            'success': True,
            'mapping': mapping_to_dict(result),
            'evaluations': result.evaluations,
            'iterations': result.iterations,
        })
    except ValueError as e:
        logger.error(f"Error mapping graph: {e}")
        return _error(e)


@mapping_bp.route('/api/evaluate', methods=['POST'])
def api_evaluate():
    """
    API endpoint scoring a mapping with the reporting evaluator

    Request JSON:
        - graph, platform (optional), mapping (mapping document), seed (optional)
    """
    try:
        body = _payload()
        g = graph_from_dict(body["graph"])
        platform = _platform(body)
        mapping, _ = mapping_from_dict(body.get("mapping"), g.num_nodes)
        evaluator = MakespanEvaluator(g, platform, EvalConfig(seed=int(body.get("seed", config.DEFAULT_SEED))))
        result = evaluator.best_result(mapping)
        return jsonify({'success': True, **result_to_dict(result)})
    except ValueError as e:
        logger.error(f"Error evaluating mapping: {e}")
        return _error(e)
