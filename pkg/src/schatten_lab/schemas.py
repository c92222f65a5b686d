"""JSON schemas for the command-line outputs (versioned)."""

SCHEMA_VERSION = "1.0"

_number_or_str = {"type": ["number", "string"]}

MANIFEST = {
    "type": "object",
    "required": ["command", "parameters", "seed", "version", "timestamp"],
    "properties": {
        "command": {"type": "string"},
        "parameters": {"type": "object"},
        "seed": {"type": ["integer", "null"]},
        "version": {"type": "string"},
        "timestamp": {"type": ["string", "null"]},
    },
}


def _envelope(result_props: dict, required: list) -> dict:
    return {
        "type": "object",
        "required": ["schema_version", "manifest", *required],
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "manifest": MANIFEST,
            **result_props,
        },
    }


VOLUME = _envelope(
    {
        "log_volume": {"type": "number"},
        "volume_if_representable": {"type": ["number", "null"]},
        "radius": {"type": "number"},
        "asymptotic_radius": {"type": "number"},
    },
    ["log_volume", "volume_if_representable", "radius"],
)

EQUILIBRIUM = _envelope(
    {
        "c": {"type": "number"},
        "p": _number_or_str,
        "grid": {"type": "array", "items": {"type": "number"}},
        "weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "energy": {"type": "number"},
        "B": {"type": "number"},
        "endpoints": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "residual": {"type": "number"},
        "iterations": {"type": "integer"},
    },
    ["c", "p", "grid", "weights", "energy", "B", "endpoints", "residual", "iterations"],
)

CHECK_REPORT = {
    "type": "object",
    "required": ["name", "sample_count", "statistic", "threshold", "passed", "seed", "details",
                 "threshold_source"],
    "properties": {
        "name": {"type": "string"},
        "sample_count": {"type": "integer"},
        "statistic": {"type": "number"},
        "threshold": {"type": "number"},
        "passed": {"type": "boolean"},
        "seed": {"type": ["integer", "null"]},
        "details": {"type": "object"},
        "threshold_source": {"type": "string"},
    },
}

SCHEMAS = {
    "manifest": MANIFEST,
    "volume": VOLUME,
    "equilibrium": EQUILIBRIUM,
    "check": CHECK_REPORT,
}
