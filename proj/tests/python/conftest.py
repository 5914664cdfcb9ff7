import os
import shutil
import pathlib

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]

HALL = """
deployment:
  id: hall
  rus:
    - antennas: [[0, 0, 2.2], [15, 10, 2.2], [25, 0, 2.2], [5, 8, 2.2]]
    - antennas: [[50, 10, 2.2], [35, 0, 2.2], [25, 10, 2.2], [45, 2, 2.2]]
simulation:
  mode: fractional
  seed: 5
trajectory:
  step: 2.0
  z: 1.5
  waypoints: [[2, 2], [48, 2], [48, 8]]
pso:
  fixed_z: 1.5
  particles: 100
  iterations: 60
  bounds: [[0, 0], [50, 10]]
"""


@pytest.fixture(scope="session")
def hall_yaml(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "hall.yaml"
    path.write_text(HALL)
    return path


@pytest.fixture(scope="session")
def cli():
    exe = os.environ.get("ULTDOA_CLI") or shutil.which("ultdoa")
    if not exe:
        pytest.skip("ultdoa command line tool not built")
    return exe
