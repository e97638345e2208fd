import json
import math
from pathlib import Path

import numpy as np
import pytest

from tsforge.config import config_from_dict
from tsforge.expr import (
    BINARY_OPS,
    UNARY_OPS,
    WINDOW_KINDS,
    Binary,
    Const,
    EvalContext,
    TimeIndex,
    Unary,
    VarRef,
    WindowAgg,
)

REPO = Path(__file__).resolve().parents[1]
FIG1_CONFIG = REPO / "configs" / "figure1_manual.json"
AUTO_CONFIG = REPO / "configs" / "automatic.json"

# constants chosen to stress number formatting as well as the guards
_SPECIAL_CONSTANTS = [0.0, -0.0, 1.0, -1.0, 2.0, 0.1, -0.3, 1e-9, 3.5e-300, 1e15, 1e20, -7.25, 9.0]


def fig1_doc() -> dict:
    return json.loads(FIG1_CONFIG.read_text())


@pytest.fixture
def fig1_spec():
    return config_from_dict(fig1_doc())


def random_tree(rng: np.random.Generator, d: int, depth: int = 4, max_lag: int = 5):
    """Arbitrary expression tree over every node kind, independent of the package samplers."""
    if depth == 0 or rng.random() < 0.25:
        kind = int(rng.integers(5))
        if kind == 0:
            if rng.random() < 0.3:
                return Const(_SPECIAL_CONSTANTS[int(rng.integers(len(_SPECIAL_CONSTANTS)))])
            return Const(float(rng.normal(0, 10)))
        if kind == 1:
            return TimeIndex()
        if kind == 2 and max_lag >= 2:
            lag_to = int(rng.integers(1, max_lag))
            lag_from = int(rng.integers(lag_to + 1, max_lag + 1))
            return WindowAgg(WINDOW_KINDS[int(rng.integers(3))], int(rng.integers(d)), lag_from, lag_to)
        return VarRef(int(rng.integers(d)), int(rng.integers(1, max_lag + 1)))
    if rng.random() < 0.4:
        return Unary(UNARY_OPS[int(rng.integers(len(UNARY_OPS)))], random_tree(rng, d, depth - 1, max_lag))
    return Binary(
        BINARY_OPS[int(rng.integers(len(BINARY_OPS)))],
        random_tree(rng, d, depth - 1, max_lag),
        random_tree(rng, d, depth - 1, max_lag),
    )


def random_context(rng: np.random.Generator, d: int, t: int | None = None, scale: float = 5.0):
    t = int(rng.integers(0, 30)) if t is None else t
    rows = rng.normal(0, scale, size=(max(t, 1), d)).tolist()
    return EvalContext.from_rows(t, rows)


def bits(x: float) -> str:
    return float(x).hex()


def fig1_oracle(total: int, x3_denominator: float = 2.0, window: tuple[int, int] | None = None):
    """Straightforward loop over the Figure 1 system; zero history before t = 0.

    With ``window`` set, x3 uses ``x3_denominator`` only inside it (and 2 elsewhere).
    """
    x = [[0.0] * 5 for _ in range(total)]

    def at(t, j):
        return x[t][j] if t >= 0 else 0.0

    for t in range(total):
        x[t][0] = math.cos((t - 2) * at(t - 3, 1))
        x[t][1] = math.cos(9 * (t - 4)) / math.sin(9)
        x[t][2] = (math.cos((t - 2) * at(t - 2, 4)) + 2 * at(t - 4, 4) - at(t - 3, 3) / 4) / 10
        integral = sum(
            (at(t - k, 2) + at(t - k - 1, 2)) / 2 * (at(t - k, 2) - at(t - k - 1, 2)) for k in range(1, 3)
        )
        den = 2.0
        if window is not None and window[0] <= t < window[1]:
            den = x3_denominator
        x[t][3] = math.sin(t - 3) - integral + at(t - 3, 3) / den
        x[t][4] = math.sin(6 * (t - 4)) + (3 * math.cos(t - 1) - 2) ** 2
    return np.array(x)
