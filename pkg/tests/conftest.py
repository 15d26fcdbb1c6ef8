import json

import numpy as np
import pytest

from posebench.pose import N_KEYPOINTS


def make_detection_dict(frame_id="1", seed=0, box=(10.0, 20.0, 100.0, 200.0), score=0.9, conf=None):
    rng = np.random.default_rng(seed)
    x0, y0, w, h = box
    kps = np.empty((N_KEYPOINTS, 3))
    kps[:, 0] = x0 + rng.uniform(-0.1, 1.1, N_KEYPOINTS) * w
    kps[:, 1] = y0 + rng.uniform(-0.1, 1.1, N_KEYPOINTS) * h
    kps[:, 2] = rng.uniform(0, 1, N_KEYPOINTS) if conf is None else conf
    return {"image_id": frame_id, "keypoints": kps.ravel().tolist(), "box": list(box), "score": score}


@pytest.fixture
def two_detection_bytes():
    doc = [make_detection_dict("0001.jpg", 1), make_detection_dict("0002.jpg", 2)]
    return json.dumps(doc).encode()
