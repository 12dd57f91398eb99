#!/usr/bin/env python3
"""Walk through the geometric primitives: cosine similarity, box unions,
and the black-out masking that turns a detection into a sub-image.

Run from the repository root:

    python3 demos/01_vectors_and_masks.py
"""

import numpy as np

from groundfuse import (
    BoundingBox,
    Image,
    apply_mask,
    apply_multi_mask,
    cosine_similarity,
    l2_normalize,
    union_box,
)

# ---------------------------------------------------------------------------
# 1. Cosine similarity is the only scoring primitive in the whole pipeline.
# ---------------------------------------------------------------------------

a = [1.0, 1.0, 0.0]
b = [1.0, 0.0, 0.0]
print("cos((1,1,0), (1,0,0)) =", cosine_similarity(a, b))
print("scale invariance:      ", cosine_similarity([10.0, 10.0, 0.0], b))
print("normalized (3,4) ->    ", l2_normalize([3.0, 4.0]))
print()

# ---------------------------------------------------------------------------
# 2. Boxes. A detector hands us one rectangle per grounded phrase; the
#    relation region spans the subject and object boxes.
# ---------------------------------------------------------------------------

subject_box = BoundingBox(1, 1, 3, 3)
object_box = BoundingBox(6, 4, 3, 3)
print("subject:", subject_box.to_dict())
print("object: ", object_box.to_dict())
print("union:  ", union_box([subject_box, object_box]).to_dict())

# Detectors emit sloppy coordinates; clamping keeps them inside the frame.
clamped = BoundingBox.clamped(-2.5, 0.2, 6.0, 4.0, frame_w=10, frame_h=8)
print("clamped raw (-2.5, 0.2, 6, 4) in 10x8:", clamped.to_dict())
print()

# ---------------------------------------------------------------------------
# 3. Masking. Sub-images keep the original frame size; everything outside
#    the box is blacked out, never cropped.
# ---------------------------------------------------------------------------

rng = np.random.default_rng(5)
image = Image(rng.integers(64, 256, size=(8, 10, 3), dtype=np.uint8))


def show(img, title):
    print(title)
    for row in img.pixels[:, :, 0]:
        print("  " + "".join("#" if v else "." for v in row))


show(image, "original (every pixel lit):")
show(apply_mask(image, subject_box), "subject sub-image:")
show(apply_multi_mask(image, [subject_box, object_box]),
     "relation sub-image (both boxes kept):")

print("\nimage id is the SHA-256 of the raw pixels:", image.id[:16], "…")
masked = apply_mask(image, subject_box)
print("masking changes the id:                   ", masked.id[:16], "…")
