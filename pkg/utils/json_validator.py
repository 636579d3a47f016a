"""
JSON Schema Validation Utility for the Trigonometric Equivalence Lab

Every file the lab reads or writes is checked against one of the schemas
below. Outputs are wrapped in a metadata envelope carrying the schema
version, the producing command, the seed and the tolerance, and never a
timestamp, so identical runs produce byte-identical files.
"""

import json
import logging
import os
from fractions import Fraction
from typing import Any, Dict, Optional

import numpy as np
from jsonschema import Draft7Validator, ValidationError

from config import Config
from utils.errors import ArtifactError

logger = logging.getLogger(__name__)

# Building blocks
COMPLEX_SCHEMA = {
    "type": "object",
    "required": ["re", "im"],
    "properties": {
        "re": {"type": "number"},
        "im": {"type": "number"}
    }
}

ROOT_SCHEMA = {
    "type": "object",
    "required": ["num", "mod"],
    "properties": {
        "num": {"type": "integer", "minimum": 0},
        "mod": {"type": "integer", "minimum": 1}
    }
}

VALUE_SCHEMA = {"oneOf": [COMPLEX_SCHEMA, ROOT_SCHEMA]}

INT_VECTOR_SCHEMA = {"type": "array", "items": {"type": "integer"}, "minItems": 1}

# Core JSON Schemas
POLYNOMIAL_SCHEMA = {
    "type": "object",
    "required": ["dim", "terms"],
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "terms": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["freq", "re", "im"],
                "properties": {
                    "freq": INT_VECTOR_SCHEMA,
                    "re": {"type": "number"},
                    "im": {"type": "number"}
                }
            }
        }
    }
}

CELL_MAP_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["from", "to"],
        "properties": {
            "from": INT_VECTOR_SCHEMA,
            "to": {"oneOf": [{"type": "integer", "minimum": 0}, INT_VECTOR_SCHEMA]}
        }
    }
}

DISTRIBUTION_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["values", "measure"],
        "properties": {
            "values": {"type": "array", "items": VALUE_SCHEMA},
            "measure": {
                "type": "object",
                "required": ["num", "den"],
                "properties": {
                    "num": {"type": "integer", "minimum": 0},
                    "den": {"type": "integer", "minimum": 1}
                }
            }
        }
    }
}

INDICES_SCHEMA = {
    "oneOf": [
        {"type": "array", "items": INT_VECTOR_SCHEMA, "minItems": 1},
        {
            "type": "object",
            "required": ["dim", "mode", "indices"],
            "properties": {
                "dim": {"type": "integer", "minimum": 1},
                "mode": {"const": "rc"},
                "indices": {"type": "array", "items": INT_VECTOR_SCHEMA, "minItems": 1}
            }
        },
        {
            "type": "object",
            "required": ["dim", "mode", "polynomials"],
            "properties": {
                "dim": {"type": "integer", "minimum": 1},
                "mode": {"const": "src"},
                "polynomials": {"type": "array", "items": POLYNOMIAL_SCHEMA, "minItems": 1}
            }
        }
    ]
}

COEFFICIENTS_SCHEMA = {
    "type": "array",
    "items": {"oneOf": [{"type": "number"}, COMPLEX_SCHEMA]},
    "minItems": 1
}

SLOT_SCHEMA = {
    "type": "object",
    "required": ["n", "order", "components", "budget", "discretization_error", "truncation_error"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "order": {"type": "integer", "minimum": 2},
        "components": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["residue", "re", "im"],
                "properties": {
                    "residue": {"type": "integer", "minimum": 0},
                    "re": {"type": "number"},
                    "im": {"type": "number"}
                }
            }
        },
        "n_vec": INT_VECTOR_SCHEMA,
        "polynomial": POLYNOMIAL_SCHEMA,
        "budget": {"type": "integer", "minimum": 1},
        "discretization_error": {"type": "number", "minimum": 0},
        "truncation_error": {"type": "number", "minimum": 0},
        "terms": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["m", "re", "im"],
                "properties": {
                    "m": {"type": "integer"},
                    "re": {"type": "number"},
                    "im": {"type": "number"}
                }
            }
        }
    }
}

PLAN_SCHEMA = {
    "type": "object",
    "required": ["mode", "dim", "n", "blocks", "offsets"],
    "properties": {
        "mode": {"enum": ["rc", "src"]},
        "dim": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "kappa": {"type": "number"},
        "total_terms": {"type": "integer", "minimum": 0},
        "terms_emitted": {"type": "boolean"},
        "blocks": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["k", "moduli", "shift", "eps", "members"],
                "properties": {
                    "k": {"type": "integer", "minimum": 0},
                    "moduli": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
                    "shift": {"type": "integer"},
                    "eps": {"type": "number", "minimum": 0},
                    "members": {"type": "array", "items": SLOT_SCHEMA, "minItems": 1}
                }
            }
        },
        "offsets": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2}
    }
}

DTS_SCHEMA = {
    "type": "object",
    "required": ["orders", "order", "functions"],
    "properties": {
        "orders": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
        "order": {"type": "integer", "minimum": 2},
        "functions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["n", "values"],
                "properties": {
                    "n": {"oneOf": [{"type": "integer"}, INT_VECTOR_SCHEMA]},
                    "values": {"type": "array", "items": ROOT_SCHEMA}
                }
            }
        },
        "coefficients": {"type": "array"},
        "spectra": {"type": "array"}
    }
}

# Reports only need their verdict and identifying fields to be well formed
REPORT_SCHEMA = {
    "type": "object",
    "required": ["passed"],
    "properties": {
        "passed": {"type": "boolean"}
    }
}

MAXIMA_SCHEMA = {
    "type": "object",
    "required": ["system", "grid", "dim", "blocks"],
    "properties": {
        "system": {"type": "string"},
        "grid": {"type": "integer", "minimum": 2},
        "dim": {"type": "integer", "minimum": 1},
        "blocks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["k", "sup_Mk", "mean_Mk", "q50", "q90", "q99"]
            }
        }
    }
}

METADATA_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "artifact", "command", "seed", "tolerance"],
    "properties": {
        "schema_version": {"type": "string"},
        "artifact": {"type": "string"},
        "command": {"type": "string"},
        "seed": {"type": "integer"},
        "tolerance": {"type": "number"}
    }
}

ARTIFACT_SCHEMAS = {
    "polynomial": POLYNOMIAL_SCHEMA,
    "cell_map": CELL_MAP_SCHEMA,
    "distribution": DISTRIBUTION_SCHEMA,
    "indices": INDICES_SCHEMA,
    "coefficients": COEFFICIENTS_SCHEMA,
    "plan": PLAN_SCHEMA,
    "dts": DTS_SCHEMA,
    "report": REPORT_SCHEMA,
    "maxima": MAXIMA_SCHEMA,
}


def _schema(kind: str) -> Dict[str, Any]:
    if kind not in ARTIFACT_SCHEMAS:
        raise ArtifactError(f"Unknown artifact kind '{kind}'")
    return ARTIFACT_SCHEMAS[kind]


def _describe(error: ValidationError) -> str:
    location = "/".join(str(p) for p in error.absolute_path) or "<root>"
    return f"{error.message} at {location}"


def schema_errors(data: Any, kind: str) -> list:
    """Readable messages for every schema violation of `data` (empty when valid)"""
    validator = Draft7Validator(_schema(kind))
    return [_describe(e) for e in sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))]


def validate_artifact(data: Any, kind: str) -> bool:
    """
    Validate data against the schema of an artifact kind

    Args:
        data: Parsed JSON value
        kind: One of ARTIFACT_SCHEMAS

    Returns:
        bool: True if valid, False otherwise
    """
    errors = schema_errors(data, kind)
    if errors:
        logger.error(f"❌ {kind} validation failed: {errors[0]}")
        return False
    return True


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Fraction):
        return {"num": value.numerator, "den": value.denominator}
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def build_metadata(kind: str, command: str, seed: int, tolerance: float, **extra: Any) -> Dict[str, Any]:
    metadata = {
        "schema_version": Config.SCHEMA_VERSION,
        "artifact": kind,
        "command": command,
        "seed": int(seed),
        "tolerance": float(tolerance),
    }
    metadata.update(extra)
    return metadata


def dumps_artifact(data: Any, metadata: Dict[str, Any]) -> str:
    """Canonical text of an enveloped artifact"""
    return json.dumps({"metadata": metadata, "data": data}, indent=2, default=_json_default) + "\n"


def export_validated_json(data: Any, filename: str, metadata: Dict[str, Any]) -> str:
    """
    Validate and export an artifact wrapped in its metadata envelope

    Args:
        data: Artifact payload (already JSON shaped)
        filename: Output filename
        metadata: Envelope from build_metadata (its "artifact" names the schema)

    Returns:
        str: The path written

    Raises:
        ArtifactError: The payload violates its schema or the file cannot be written
    """
    kind = metadata["artifact"]
    errors = schema_errors(data, kind)
    if errors:
        logger.error("❌ Data validation failed before export")
        raise ArtifactError(f"Refusing to write invalid {kind} artifact: {errors[0]}")
    text = dumps_artifact(data, metadata)
    try:
        folder = os.path.dirname(filename)
        if folder:
            os.makedirs(folder, exist_ok=True)
        with open(filename, 'w', encoding='utf-8') as f:
            f.write(text)
    except OSError as e:
        logger.error(f"❌ Export failed: {e}")
        raise ArtifactError(f"Cannot write {filename}: {e.strerror or e}") from e
    logger.info(f"✅ Exported validated {kind} JSON to {filename}")
    return filename


def load_and_validate_json(filename: str, kind: str, with_metadata: bool = False) -> Any:
    """
    Load and validate JSON data from file

    Args:
        filename: Input filename
        kind: Expected artifact kind
        with_metadata: Also return the envelope metadata (None for bare files)

    Returns:
        The validated payload, or (payload, metadata) when with_metadata is set

    Raises:
        ArtifactError: Missing file, malformed JSON (with line and column) or schema violation
    """
    try:
        with open(filename, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise ArtifactError(f"Input file not found: {filename}") from e
    except json.JSONDecodeError as e:
        raise ArtifactError(f"Malformed JSON in {filename} at line {e.lineno}, column {e.colno}: {e.msg}") from e
    except OSError as e:
        raise ArtifactError(f"Cannot read {filename}: {e.strerror or e}") from e

    metadata: Optional[Dict[str, Any]] = None
    # If it's an export file with metadata, extract the data
    if isinstance(data, dict) and "metadata" in data and "data" in data:
        metadata = data["metadata"]
        errors = [_describe(e) for e in Draft7Validator(METADATA_SCHEMA).iter_errors(metadata)]
        if errors:
            raise ArtifactError(f"Bad metadata envelope in {filename}: {errors[0]}")
        data = data["data"]

    errors = schema_errors(data, kind)
    if errors:
        raise ArtifactError(f"{filename} is not a valid {kind} artifact: {errors[0]}")
    logger.info(f"✅ Loaded and validated {kind} JSON from {filename}")
    return (data, metadata) if with_metadata else data

