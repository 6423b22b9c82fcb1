"""Define SVG rendering of recorded episodes."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import matplotlib

matplotlib.use("Agg")

from matplotlib import transforms  # noqa: E402
from matplotlib.axes import Axes  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402

from cgrlpy.errors import ConfigError, DomainError  # noqa: E402

_LOGGER: logging.Logger = logging.getLogger(__name__)

FIGURE_INCHES = 6.0
MARGIN = 5.0

COLOR_BACKGROUND = "#3a7d44"
COLOR_EGO = "#e63946"
COLOR_HUMAN = "#457b9d"
COLOR_MARKING = "#f1faee"
COLOR_ROAD = "#555555"

GID_EGO = "ego"
GID_REWARD = "reward"

PathLike = Union[str, Path]


def vehicle_gid(vehicle: Dict[str, Any]) -> str:
    """Return the SVG id of a recorded vehicle."""
    return GID_EGO if vehicle["is_ego"] else f"vehicle-{vehicle['id']}"


def _new_axes(document: Dict[str, Any]):
    extent = float(document["road_half_length"]) + MARGIN
    fig, ax = plt.subplots(figsize=(FIGURE_INCHES, FIGURE_INCHES))
    fig.subplots_adjust(left=0.0, right=1.0, bottom=0.0, top=1.0)
    ax.set_xlim(-extent, extent)
    ax.set_ylim(-extent, extent)
    ax.set_aspect("equal")
    ax.set_facecolor(COLOR_BACKGROUND)
    ax.axis("off")
    fig.patch.set_facecolor(COLOR_BACKGROUND)
    return fig, ax


def _draw_roads(ax: Axes, document: Dict[str, Any]) -> None:
    lane = float(document["lane_width"])
    reach = float(document["road_half_length"])
    for gid, half_x, half_y in (("road-ns", lane, reach), ("road-ew", reach, lane)):
        road = Rectangle(
            (-half_x, -half_y), 2.0 * half_x, 2.0 * half_y, facecolor=COLOR_ROAD
        )
        road.set_gid(gid)
        ax.add_patch(road)
    ax.plot([0.0, 0.0], [-reach, reach], color=COLOR_MARKING, linestyle="--")
    ax.plot([-reach, reach], [0.0, 0.0], color=COLOR_MARKING, linestyle="--")


def _draw_vehicle(
    ax: Axes, vehicle: Dict[str, Any], length: float, width: float
) -> Rectangle:
    x, y = float(vehicle["x"]), float(vehicle["y"])
    body = Rectangle(
        (x - length / 2.0, y - width / 2.0),
        length,
        width,
        facecolor=COLOR_EGO if vehicle["is_ego"] else COLOR_HUMAN,
        edgecolor=COLOR_MARKING if vehicle["is_ego"] else "none",
    )
    # Headings are counter-clockwise from +x, as is the data frame.
    body.set_transform(
        transforms.Affine2D().rotate_around(x, y, float(vehicle["heading"]))
        + ax.transData
    )
    body.set_gid(vehicle_gid(vehicle))
    ax.add_patch(body)
    return body


def render_frame(document: Dict[str, Any], index: int) -> Figure:
    """Return the figure of one recorded decision step.

    The caller owns the figure; :func:`write_frame` saves and closes it.

    :param document: A recorded episode
    :type document: ``Dict[str, Any]``
    :param index: The frame index
    :type index: ``int``
    :rtype: ``matplotlib.figure.Figure``
    """
    frame = document["frames"][index]
    fig, ax = _new_axes(document)
    _draw_roads(ax, document)
    for vehicle in frame["vehicles"]:
        if vehicle["present"]:
            _draw_vehicle(
                ax,
                vehicle,
                float(document["vehicle_length"]),
                float(document["vehicle_width"]),
            )
    label = ax.text(
        0.02,
        0.97,
        f"step {frame['steps']}  reward {float(frame['reward']):.3f}",
        color=COLOR_MARKING,
        transform=ax.transAxes,
        verticalalignment="top",
    )
    label.set_gid(GID_REWARD)
    return fig


def write_frame(fig: Figure, path: PathLike) -> None:
    """Save a frame as SVG and release the figure."""
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)


def load_trajectory(path: PathLike) -> Dict[str, Any]:
    """Read a recorded episode."""
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as err:
        raise ConfigError(f"Cannot read trajectory {path}: {err}") from None


def render_trajectory(document: Dict[str, Any], out_dir: PathLike) -> List[Path]:
    """Write one SVG file per recorded decision step.

    :raises DomainError: when the trajectory has no frames
    """
    frames = document.get("frames") or []
    if not frames:
        raise DomainError("Cannot render a trajectory without frames")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    with plt.rc_context({"svg.hashsalt": "cgrl"}):
        for index in range(len(frames)):
            path = out / f"frame-{index:04d}.svg"
            write_frame(render_frame(document, index), path)
            written.append(path)
    _LOGGER.debug("Rendered %s frames into %s", len(written), out)
    return written
