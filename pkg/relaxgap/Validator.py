import json
import logging
import os
from functools import lru_cache
from typing import Any, Optional

from jsonschema import ValidationError, validate

from relaxgap.RelaxGapUtilities import to_plain
from relaxgap.relaxation_errors import OutputSchemaError

SCHEMA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "schemas")

validator_logger = logging.getLogger("relaxgap.validator")


@lru_cache(maxsize=None)
def load_schema(command: str) -> dict:
    """The schema shipped for a subcommand's JSON result, schemas/<command>.schema.json."""
    with open(os.path.join(SCHEMA_DIR, f"{command}.schema.json"), "r", encoding="utf-8") as file:
        return json.load(file)


def validate_json_data(json_object: Any, json_schema: dict) -> tuple[bool, Optional[str]]:
    """
    Validates a plain JSON document against a schema.

    Returns:
        (valid, error_message): error_message is None when valid.
    """
    try:
        validate(instance=json_object, schema=json_schema)
    except ValidationError as e:
        path = "/".join(str(part) for part in e.absolute_path) or "(root)"
        return False, f"at {path}: {e.message}"
    return True, None


def validate_output(command: str, document: Any) -> Any:
    """
    Converts a result into plain JSON values and checks it against the
    subcommand's schema.

    Returns:
        The plain document, ready to serialise.
    Raises:
        (OutputSchemaError): If the document does not match.
    """
    plain = to_plain(document)
    valid, error_message = validate_json_data(plain, load_schema(command))
    if not valid:
        validator_logger.error(f"Validation failed for the {command} result: {error_message}")
        raise OutputSchemaError(command, error_message)
    validator_logger.debug(f"The {command} result is valid against its schema.")
    return plain
