import os
from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def mnist_root():
    root = os.environ.get("ROTAF_DATA_DIR") or "/root/data/mnist"
    return root if (Path(root) / "train-images-idx3-ubyte").exists() or \
        (Path(root) / "train-images-idx3-ubyte.gz").exists() else None


@pytest.fixture(scope="session")
def mnist_dir():
    root = mnist_root()
    if root is None:
        pytest.skip("MNIST not available; set ROTAF_DATA_DIR")
    return root
