"""Line charts as standalone, byte-deterministic SVG documents."""

import io
import logging
from typing import Dict, Optional, Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .errors import UsageError

logger = logging.getLogger("montevideo_sim.plotting")

FIGURE_SIZE = (6.4, 4.0)
SVG_RC = {
    "svg.hashsalt": "montevideo-sim",
    "svg.fonttype": "none",
    "path.simplify": False,
}


def _validated(name: str, values: Sequence[float], length: Optional[int]) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim != 1 or array.size == 0:
        raise UsageError(f"series {name!r} is empty")
    if length is not None and array.size != length:
        raise UsageError(f"series {name!r} has {array.size} points, abscissa has {length}")
    bad = np.flatnonzero(~np.isfinite(array))
    if bad.size:
        raise UsageError(f"series {name!r} has non-finite values at index {bad.tolist()}")
    return array


def emit_svg(
    x: Sequence[float],
    series: Dict[str, Sequence[float]],
    *,
    x_label: str = "",
    y_label: str = "",
    title: Optional[str] = None,
    log_x: bool = False,
) -> str:
    """Render labeled series against ``x`` as an SVG line plot.

    Args:
        x: Abscissa shared by all series
        series: Legend label to ordinate values, drawn in insertion order
        x_label: Axis label for x
        y_label: Axis label for y
        title: Optional figure title
        log_x: Logarithmic abscissa

    Returns:
        The SVG document text. Identical input gives identical bytes.

    Raises:
        UsageError: If there are no series, lengths differ or a value is NaN
            or infinite
    """
    if not series:
        raise UsageError("emit_svg needs at least one series")
    abscissa = _validated(x_label or "x", x, None)
    curves = {label: _validated(label, values, abscissa.size) for label, values in series.items()}

    with matplotlib.rc_context(SVG_RC):
        figure = Figure(figsize=FIGURE_SIZE)
        axes = figure.add_subplot()
        for label, values in curves.items():
            axes.plot(abscissa, values, label=label, linewidth=1.2)
        if log_x:
            axes.set_xscale("log")
        axes.set_xlabel(x_label)
        axes.set_ylabel(y_label)
        if title:
            axes.set_title(title)
        axes.grid(True, linewidth=0.3)
        axes.legend(loc="best")
        buffer = io.BytesIO()
        figure.savefig(buffer, format="svg", metadata={"Date": None})
    logger.debug(f"Rendered {len(curves)} series of {abscissa.size} points")
    return buffer.getvalue().decode("utf-8")
