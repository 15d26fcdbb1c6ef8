"""
From pose JSON to a 71-value feature vector
===========================================

"""

import numpy as np

from posebench.features import FEATURE_LAYOUT, featurize
from posebench.pose import N_KEYPOINTS, BoundingBox, PoseDetection, dump_pose_json, parse_pose_json

# one detection: 136 keypoints as (x, y, confidence), a box and a score
rng = np.random.default_rng(0)
kps = np.column_stack([rng.uniform(100, 300, (N_KEYPOINTS, 2)), rng.uniform(0, 1, N_KEYPOINTS)])
det = PoseDetection("000042.jpg", kps, BoundingBox(90.0, 95.0, 220.0, 215.0), 0.97)

# the JSON form round-trips exactly
raw = dump_pose_json([det])
print(raw[:120], b"...")
assert parse_pose_json(raw)[0] == det

# body points map into box units; face and hands are summarised
# by the mean, min and max of their 10 most confident points
f = featurize(det)
for name, value in list(zip(FEATURE_LAYOUT, f))[50:58]:
    print(f"{name:>14} {value: .4f}")
print("box aspect", f[-1], "=", 220.0 / 215.0)

# moving or zooming the whole picture leaves the features alone
moved = PoseDetection(det.frame_id, np.column_stack([kps[:, :2] * 2 + 50, kps[:, 2]]),
                      BoundingBox(230.0, 240.0, 440.0, 430.0), det.score)
print("max change after shift+zoom:", np.abs(featurize(moved) - f).max())
