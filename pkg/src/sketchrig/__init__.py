"""sketchrig: turn an annotated figure drawing into an animatable 2.5D character.

The pipeline is: parse + validate annotations (:mod:`sketchrig.annotation`),
build the two-view character rig (:mod:`sketchrig.rig` on top of
:mod:`sketchrig.raster`), ingest BVH motion (:mod:`sketchrig.motion`),
retarget it view-dependently per frame (:mod:`sketchrig.retarget`), and
deform/composite the textured mesh (:mod:`sketchrig.deform`).  The CLI and
the streaming service live in :mod:`sketchrig.cli` / :mod:`sketchrig.service`.

Coordinate conventions used throughout:

* image space: x grows right, y grows down, pixel (i, j) covers the unit
  square [i, i+1) x [j, j+1) with its center at (i + 0.5, j + 0.5);
* world space: y up, right-handed, ground plane is (x, z);
* character plane space: x along the plane's screen-right axis, y up,
  origin at the character root.

Masks are boolean ``(H, W)`` arrays; images are uint8 ``(H, W, 4)`` RGBA
with straight (non-premultiplied) alpha.
"""

__version__ = "0.1.0"
