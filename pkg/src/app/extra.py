import ast
import json

import fsspec
from pydantic import ValidationError

from app.data_models import TrainConfig
from app.symclaw_logger import logger


def string_to_json(string: str) -> dict | None:
    """
    Converts a string to a JSON object.

    Args:
        string (str): The string to convert.

    Returns:
        dict | None: The JSON object if conversion is successful, None otherwise.
    """
    try:
        return json.loads(string)
    except json.JSONDecodeError:
        try:
            return ast.literal_eval(string)
        except (ValueError, SyntaxError) as ast_err:
            logger.error(f"ast.literal_eval failed: {ast_err}")
            return None


def parse_string_to_list(input_string: str) -> list[float] | None:
    """
    Parses a list of numbers given either as ``"[1, 2.5]"`` or ``"1,2.5"``.

    Args:
        input_string (str): The string to parse.

    Returns:
        list[float] | None: The parsed values, or None for an empty string.
    """
    input_string = input_string.strip()
    if not input_string:
        return None
    if input_string.startswith("[") and input_string.endswith("]"):
        values = ast.literal_eval(input_string)
    else:
        values = [item for item in input_string.split(",") if item.strip()]
    return [float(v) for v in values]


def process_extra_args(extra_args: str | None) -> dict:
    """
    Parses ``--extra_args``, a JSON (or Python literal) dict of TrainConfig
    overrides.

    Raises:
        ValueError: If the string is not a dict.
    """
    if not extra_args:
        return {}
    parsed = string_to_json(extra_args)
    if not isinstance(parsed, dict):
        raise ValueError(f"Extra arguments must be a dict, got: {extra_args}")
    return parsed


def load_config(path: str | None, overrides: dict | None = None) -> TrainConfig:
    """
    Reads a training configuration file and applies overrides on top.

    Args:
        path (str | None): JSON file (local path or fsspec URL); defaults only
            when None.
        overrides (dict | None): Field values that take precedence.

    Returns:
        TrainConfig: Validated configuration.
    """
    content = {}
    if path:
        try:
            with fsspec.open(path, "r") as f:
                text = f.read()
        except FileNotFoundError as e:
            logger.error("Config file not found: %s", path)
            raise FileNotFoundError(f"Config file not found: {path}") from e
        content = string_to_json(text) if text.strip() else {}
        if not isinstance(content, dict):
            raise ValueError(f"Config file {path} does not hold a JSON object")
    content.update(overrides or {})
    try:
        return TrainConfig(**content)
    except ValidationError as e:
        logger.error("Invalid training configuration: %s", e)
        raise ValueError(f"Invalid training configuration: {e}") from e
