"""
Setup logging
"""

import logging
import os
import sys

logger = logging.getLogger("symclaw")
logger.setLevel(logging.INFO)

log_format = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")


# add a file handler, once
log_file = os.environ.get("SYMCLAW_LOG_FILE", "/tmp/symclaw.log")
if not any(isinstance(handler, logging.FileHandler) for handler in logger.handlers):
    file_handler = logging.FileHandler(log_file)
    file_handler.setFormatter(log_format)
    logger.addHandler(file_handler)

# Check if a StreamHandler already exists
if not any(type(handler) is logging.StreamHandler for handler in logger.handlers):
    stream_handler = logging.StreamHandler(sys.stdout)
    stream_handler.setFormatter(log_format)
    logger.addHandler(stream_handler)


for handler in logger.handlers:
    handler.setFormatter(log_format)
