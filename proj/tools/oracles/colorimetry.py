"""Reference CIE values for the colour tests, computed with scikit-image."""
import numpy as np
from skimage import color


def show(name, rgb8):
    rgb = np.array([[rgb8]], dtype=float) / 255.0
    lab = color.rgb2lab(rgb)
    print(name, "Lab", lab[0, 0], "LCh", color.lab2lch(lab)[0, 0])
    return lab


lab = show("red", [255, 0, 0])
lab[..., 0] += 10
out = np.round(np.clip(color.lab2rgb(lab), 0, 1) * 255)
print("red L+10 ->", out[0, 0])
show("green-ish", [10, 200, 90])
