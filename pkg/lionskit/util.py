import logging
import typing as t

import colorlog
import numpy as np
from colorlog.escape_codes import escape_codes


def setup_logging(level=logging.INFO, debug: bool = False, width: int = 30):
    reset = escape_codes["reset"]
    log_format = f"%(asctime)-15s [%(name)-{width}s] %(log_color)s%(levelname)-8s:{reset} %(message)s"

    handler = colorlog.StreamHandler()
    handler.setFormatter(colorlog.ColoredFormatter(log_format))

    if debug:
        level = logging.DEBUG
    logging.basicConfig(format=log_format, level=level, handlers=[handler])


def make_rng(seed: t.Union[int, np.random.Generator, None] = None) -> np.random.Generator:
    """
    Accept a seed or an existing generator, so randomized checks stay reproducible.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_array(rng: np.random.Generator, shape: t.Tuple[int, ...], complex_: bool = False) -> np.ndarray:
    if complex_:
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return rng.standard_normal(shape)
