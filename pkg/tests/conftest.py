import numpy as np
import pytest

from caqim.pgm import crop_to_blocks

CORPUS_NAMES = ("camera", "moon", "coins", "brick", "grass", "gravel", "clock", "cell",
                "page", "text")


def _synthetic(seed, size=128):
    # smooth gradient plus texture: stand-in when scikit-image data is unavailable
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:size, 0:size]
    base = 128 + 60 * np.sin(x / (7 + seed)) * np.cos(y / (11 + seed))
    return np.clip(base + rng.normal(0, 8, base.shape), 0, 255).astype(np.uint8)


def load_corpus(size=256, names=CORPUS_NAMES):
    try:
        import skimage.data as data
    except ImportError:
        return [_synthetic(i, size) for i in range(len(names))]
    planes = []
    for n in names:
        img = getattr(data, n)()
        if img.ndim == 3:
            img = (img[..., :3] @ [0.299, 0.587, 0.114]).round().astype(np.uint8)
        planes.append(np.ascontiguousarray(crop_to_blocks(img)[:size, :size]))
    return planes


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


@pytest.fixture(scope="session")
def small_image():
    return load_corpus(size=64, names=("camera",))[0]


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
