"""Writes the eval fixture: two 64x64 scenes whose occupancy maps paint whole
column bands around players, so each outcome can be counted by hand."""
import json
import pathlib
import sys

import numpy as np
from PIL import Image

out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures/eval")
out.mkdir(parents=True, exist_ok=True)
COLUMNS = [8, 24, 40, 56]


def player(x, team, depth):
    return {"head": [x, 14], "pelvis": [x, 30], "foot_l": [x - 3, 47], "foot_r": [x + 3, 47],
            "team": team, "depth": depth}


# (team, occupancy label painted over the player's band; 0 leaves it unpainted)
SCENES = {
    "scene_a": [("A", 1), ("A", 1), ("B", 2), ("B", 0)],
    "scene_b": [("A", 2), ("B", 1), ("B", 2)],
}
for name, players in SCENES.items():
    img = np.full((64, 64, 3), 90, np.uint8)
    with open(out / f"{name}.ppm", "wb") as f:
        f.write(b"P6\n64 64\n255\n" + img.tobytes())
    occ = np.zeros((64, 64), np.uint8)
    for k, (_, label) in enumerate(players):
        occ[:, COLUMNS[k] - 7:COLUMNS[k] + 8] = label
    Image.fromarray(occ, mode="L").save(out / f"{name}.occupancy.png")
    doc = {"game_id": "g", "arena_id": "a", "image": f"{name}.ppm",
           "players": [player(COLUMNS[k], t, k) for k, (t, _) in enumerate(players)]}
    (out / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")
