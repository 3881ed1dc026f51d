"""
Reading and writing networks in the JSON network format.

Format (UTF-8 JSON):

    {
      "variables": [{"name": "A", "cardinality": 2}, ...],
      "cpts": [{"child": "B", "parents": ["A"], "table": [0.9, 0.1, 0.2, 0.8]}, ...]
    }

`table` is flat: one row per parent configuration in the order the parents are
listed, last parent fastest-varying, each row holding the child distribution.
Probabilities are written with full double precision so a parse of the
serialized text reproduces the network bit for bit.

An instance document wraps a network with replay metadata:
    {"network": {...}, "metadata": {"seed": ..., "map_variables": [...], "evidence": {...}}}
"""
import json
import logging

import numpy as np

from bayes_net import BayesianNetwork, Cpt, Variable
from errors import NetworkFormatError, NetworkValidationError

# Configure logging for this module
logger = logging.getLogger(__name__)


def _require(mapping, key, kind, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise NetworkValidationError(f"{where}: missing key {key!r}")
    value = mapping[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise NetworkValidationError(f"{where}: {key!r} has the wrong type")
    return value


def _network_from_document(doc):
    if not isinstance(doc, dict):
        raise NetworkValidationError("top level must be a JSON object")

    variables = []
    for index, entry in enumerate(_require(doc, "variables", list, "document")):
        name = _require(entry, "name", str, f"variable #{index}")
        cardinality = _require(entry, "cardinality", int, f"variable {name!r}")
        variables.append(Variable(index, name, cardinality))

    ids = {}
    for var in variables:
        if var.name in ids:
            raise NetworkValidationError(f"variable {var.name!r} declared twice")
        ids[var.name] = var.id

    def lookup(name, where):
        if name not in ids:
            raise NetworkValidationError(f"{where}: unknown variable {name!r}")
        return ids[name]

    cpts = [None] * len(variables)
    for index, entry in enumerate(_require(doc, "cpts", list, "document")):
        child_name = _require(entry, "child", str, f"cpt #{index}")
        where = f"CPT of {child_name!r}"
        child = lookup(child_name, where)
        parents = [lookup(p, where) for p in _require(entry, "parents", list, where)]
        flat = _require(entry, "table", list, where)
        shape = tuple(variables[p].cardinality for p in parents) + (variables[child].cardinality,)
        if len(flat) != int(np.prod(shape)):
            raise NetworkValidationError(f"{where}: table has {len(flat)} entries, expected {int(np.prod(shape))}")
        if not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in flat):
            raise NetworkValidationError(f"{where}: table entries must be numbers")
        if cpts[child] is not None:
            raise NetworkValidationError(f"{where}: declared twice")
        cpts[child] = Cpt(child, tuple(parents), np.asarray(flat, dtype=np.float64).reshape(shape))

    missing = [variables[i].name for i, cpt in enumerate(cpts) if cpt is None]
    if missing:
        raise NetworkValidationError(f"no CPT for variable {missing[0]!r}")

    return BayesianNetwork(tuple(variables), tuple(cpts))


def _load_document(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise NetworkFormatError(f"syntax error: {e.msg}", line=e.lineno) from e


def parse_network(text):
    """
    Parses network-file content into a validated BayesianNetwork.
    Instance documents are accepted too; their metadata is ignored.

    Raises:
        NetworkFormatError: JSON syntax error (carries the line number).
        NetworkValidationError: cycle, non-normalized CPT, bad cardinality, ...
    """
    doc = _load_document(text)
    if isinstance(doc, dict) and "network" in doc:
        doc = doc["network"]
    return _network_from_document(doc)


def network_document(net):
    return {
        "variables": [{"name": v.name, "cardinality": v.cardinality} for v in net.variables],
        "cpts": [
            {
                "child": net.names[cpt.child],
                "parents": [net.names[p] for p in cpt.parents],
                "table": [float(p) for p in cpt.table.ravel()],
            }
            for cpt in net.cpts
        ],
    }


def serialize_network(net):
    """Serializes a network; parse_network(serialize_network(net)) == net."""
    return json.dumps(network_document(net), indent=2)


def load_network(path):
    with open(path, "r", encoding="utf-8") as f:
        net = parse_network(f.read())
    logger.info(f"Loaded network with {net.n} variables from '{path}'.")
    return net


def save_network(path, net):
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_network(net))
    logger.info(f"Network saved to '{path}'.")


def load_instance(path):
    """
    Reads a network or instance document.

    Returns:
        tuple: (BayesianNetwork, metadata dict; empty for a plain network file)
    """
    with open(path, "r", encoding="utf-8") as f:
        doc = _load_document(f.read())
    metadata = {}
    if isinstance(doc, dict) and "network" in doc:
        metadata = doc.get("metadata") or {}
        doc = doc["network"]
    return _network_from_document(doc), metadata


def save_instance(path, net, metadata):
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"network": network_document(net), "metadata": metadata}, f, indent=2)
    logger.info(f"Instance saved to '{path}'.")
