"""Define tests for SVG rendering of recorded episodes."""
import json
import math
import xml.etree.ElementTree as ET

import matplotlib.pyplot as plt
import numpy as np
import pytest

from cgrlpy.errors import ConfigError, DomainError
from cgrlpy.harness.render import (
    GID_EGO,
    GID_REWARD,
    MARGIN,
    load_trajectory,
    render_frame,
    render_trajectory,
)

VEHICLE_LENGTH = 5.0
VEHICLE_WIDTH = 2.0


def _vehicle(vehicle_id, x, y, heading=0.0, present=True):
    return {
        "id": vehicle_id,
        "present": present,
        "x": x,
        "y": y,
        "heading": heading,
        "speed": 8.0,
        "is_ego": vehicle_id == 0,
    }


def _document(frames=None):
    if frames is None:
        frames = [
            {
                "steps": 1,
                "action": 1,
                "reward": 0.25,
                "vehicles": [
                    _vehicle(0, 2.0, -22.0, heading=math.pi / 2.0),
                    _vehicle(1, -12.5, 2.0, heading=math.pi),
                    _vehicle(2, 0.0, 0.0, present=False),
                ],
            }
        ]
    return {
        "model": "cgrl",
        "task": "straight",
        "seed": 0,
        "episode": 0,
        "outcome": "arrived",
        "lane_width": 4.0,
        "road_half_length": 40.0,
        "vehicle_length": VEHICLE_LENGTH,
        "vehicle_width": VEHICLE_WIDTH,
        "frames": frames,
    }


@pytest.fixture()
def frame_axes():
    """Return the axes of the first recorded frame and close the figure after."""
    fig = render_frame(_document(), 0)
    yield fig.axes[0]
    plt.close(fig)


def _corners(ax, patch):
    """Return the four corners of a patch in world coordinates."""
    return ax.transData.inverted().transform(patch.get_verts())[:4]


def test_axes_cover_the_roads(frame_axes):
    """Test that the view spans the arms plus a margin with y pointing north."""
    extent = 40.0 + MARGIN
    assert frame_axes.get_xlim() == (-extent, extent)
    assert frame_axes.get_ylim() == (-extent, extent)


def test_frame_places_vehicles(frame_axes):
    """Test that present vehicles are drawn at their poses."""
    patches = {patch.get_gid(): patch for patch in frame_axes.patches}
    assert set(patches) == {"road-ns", "road-ew", GID_EGO, "vehicle-1"}

    ego = _corners(frame_axes, patches[GID_EGO])
    assert ego.mean(axis=0) == pytest.approx([2.0, -22.0], abs=1e-6)
    # Heading north: the long side runs along y.
    assert np.ptp(ego[:, 1]) == pytest.approx(VEHICLE_LENGTH, abs=1e-6)
    assert np.ptp(ego[:, 0]) == pytest.approx(VEHICLE_WIDTH, abs=1e-6)

    human = _corners(frame_axes, patches["vehicle-1"])
    assert human.mean(axis=0) == pytest.approx([-12.5, 2.0], abs=1e-6)
    assert np.ptp(human[:, 0]) == pytest.approx(VEHICLE_LENGTH, abs=1e-6)

    labels = [text for text in frame_axes.texts if text.get_gid() == GID_REWARD]
    assert labels[0].get_text() == "step 1  reward 0.250"


def test_render_trajectory(tmp_path):
    """Test that every frame becomes one SVG file carrying the vehicle ids."""
    document = _document()
    document["frames"].append(dict(document["frames"][0], steps=2))
    written = render_trajectory(document, tmp_path / "frames")
    assert [path.name for path in written] == ["frame-0000.svg", "frame-0001.svg"]

    root = ET.parse(written[1]).getroot()
    assert root.tag.endswith("svg")
    ids = {element.get("id") for element in root.iter()}
    assert {GID_EGO, "vehicle-1", GID_REWARD} <= ids
    assert "vehicle-2" not in ids


def test_render_is_deterministic(tmp_path):
    """Test that the same trajectory gives the same files."""
    first = render_trajectory(_document(), tmp_path / "a")
    second = render_trajectory(_document(), tmp_path / "b")
    assert first[0].read_bytes() == second[0].read_bytes()


def test_render_without_frames(tmp_path):
    """Test that an empty trajectory is refused."""
    with pytest.raises(DomainError):
        render_trajectory(_document(frames=[]), tmp_path)


def test_load_trajectory(tmp_path):
    """Test reading recorded episodes."""
    path = tmp_path / "trajectory.json"
    path.write_text(json.dumps(_document()), encoding="utf-8")
    assert load_trajectory(path)["outcome"] == "arrived"

    with pytest.raises(ConfigError):
        load_trajectory(tmp_path / "absent.json")
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_trajectory(path)
