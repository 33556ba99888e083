"""
Utility functions for the phase estimation bench.
"""
import os
import logging
import hashlib
import tempfile
from pathlib import Path

# Setup logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.StreamHandler()
    ]
)

logger = logging.getLogger("phase_bench")

DEFAULT_OUTPUT_DIR = 'results'
OUTPUT_DIR_ENV = 'PHASE_BENCH_OUTPUT_DIR'


def set_log_level(verbose=False, quiet=False):
    """Adjust the shared logger for --verbose / --quiet."""
    if verbose:
        logger.setLevel(logging.DEBUG)
    elif quiet:
        logger.setLevel(logging.WARNING)
    else:
        logger.setLevel(logging.INFO)


def resolve_output_dir(cli_value=None):
    """
    Pick the output directory.

    Args:
        cli_value: value of --out, wins when given

    Returns:
        Path: --out, else $PHASE_BENCH_OUTPUT_DIR, else results/
    """
    if cli_value:
        return Path(cli_value)
    env_value = os.getenv(OUTPUT_DIR_ENV)
    if env_value:
        return Path(env_value)
    return Path(DEFAULT_OUTPUT_DIR)


def atomic_write_text(path, text):
    """Write text to path via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, 'w', newline='') as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.info(f"Wrote {path}")
    return path


def generate_content_hash(path):
    """SHA-256 digest of a written file, recorded in run manifests."""
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def format_value(value):
    """Render a number for the human-readable tables."""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)
