import os
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent

MNIST_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
               "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


def mnist_dir() -> Path | None:
    """Directory holding the four MNIST IDX files (.gz accepted), if any."""
    candidates = []
    env = os.environ.get("NLL_MNIST_DIR")
    if env:
        candidates.append(Path(env))
    candidates.append(REPO_ROOT / "data" / "mnist")
    for root in candidates:
        if all((root / f).exists() or (root / f"{f}.gz").exists()
               for f in MNIST_FILES):
            return root
    return None


def require_mnist() -> Path:
    root = mnist_dir()
    if root is None:
        pytest.skip("MNIST IDX files not found; place the four canonical "
                    "files under data/mnist/ or set NLL_MNIST_DIR "
                    "(see README for download instructions)")
    return root


@pytest.fixture(scope="session")
def mnist_data_dir() -> Path:
    return require_mnist()
