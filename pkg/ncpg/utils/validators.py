import json
import logging
import math
import os
from typing import Any, Dict, List

logger = logging.getLogger(__name__)

_SCHEMA_PATH = os.path.join(os.path.dirname(__file__), '..', 'config', 'report_schema.json')


def load_report_schema(path: str = _SCHEMA_PATH) -> Dict[str, Any]:
    """Loads the verify-report schema shipped in config/."""
    with open(path, 'r', encoding='utf-8') as handle:
        return json.load(handle)


def is_valid_check_record(record: Dict[str, Any], schema: Dict[str, Any]) -> bool:
    """
    Validates one `{suite, check, status, measured, tolerance}` record.

    Args:
        record: The record produced by a suite.
        schema: The schema loaded by `load_report_schema`.

    Returns:
        True if the record has every required key with the expected type.
    """
    if not isinstance(record, dict):
        logger.warning("Validation Error: report record is not a dictionary.")
        return False

    for key, expected in schema["fields"].items():
        if key not in record:
            logger.warning(f"Validation Error: missing '{key}' in record {record}.")
            return False
        value = record[key]
        if expected == "string" and not isinstance(value, str):
            logger.warning(f"Validation Error: '{key}' must be a string.")
            return False
        if expected == "number_or_null" and value is not None:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                logger.warning(f"Validation Error: '{key}' must be a number or null.")
                return False
            if isinstance(value, float) and math.isnan(value):
                logger.warning(f"Validation Error: '{key}' is NaN.")
                return False

    if record["status"] not in schema["statuses"]:
        logger.warning(f"Validation Error: unknown status '{record['status']}'.")
        return False

    return True


def is_valid_report(records: List[Dict[str, Any]], schema: Dict[str, Any] = None) -> bool:
    """
    Validates a full verify report.

    Args:
        records: All check records of a run, in report order.
        schema: Optional preloaded schema.

    Returns:
        True if every record is valid.
    """
    if not isinstance(records, list):
        logger.warning("Validation Error: report is not a list.")
        return False
    schema = schema or load_report_schema()
    return all(is_valid_check_record(record, schema) for record in records)
