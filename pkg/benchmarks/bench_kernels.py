"""Benchmark the hot kernels on both backends (numba @njit vs pure numpy).

Run from the repo root:  python3 benchmarks/bench_kernels.py
"""

import os
import sys
import time

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(REPO, "src"))
sys.path.insert(0, os.path.join(REPO, "tests"))

import numpy as np  # noqa: E402

from sketchrig import accel, kernels, raster  # noqa: E402


def timeit(fn, repeats=5):
    fn()  # warm up (numba compiles here)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_paint():
    from synth import make_plain_figure
    from sketchrig import annotation, rig as rig_mod
    from sketchrig.retarget import BONE_LABELS

    img, doc = make_plain_figure(scale=2)
    aset = annotation.parse_annotations(doc, (img.shape[1], img.shape[0]))
    rig = rig_mod.build_rig(aset, img, register_arap=False)
    view = rig.view("left")
    mesh = view.mesh("nn")
    tex = view.texture("nn", "front")
    order = np.arange(len(mesh.triangles))
    h, w = tex.shape[:2]

    def run():
        out = np.zeros((h, w, 4), dtype=np.uint8)
        kernels.paint_triangles(out, mesh.vertices, mesh.triangles, order,
                                mesh.uv, tex)

    return f"paint_triangles ({len(mesh.triangles)} tris, {w}x{h})", run


def bench_coverage():
    t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    loop = np.stack([400 + 350 * np.cos(t), 400 + 350 * np.sin(t)], axis=1)
    mesh = raster.triangulate(loop, max_area=200)

    def run():
        kernels.rasterize_coverage((800, 800), mesh.vertices, mesh.triangles)

    return f"rasterize_coverage ({len(mesh.triangles)} tris, 800x800)", run


def bench_inpaint():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(400, 400, 4)).astype(np.uint8)
    holes = np.zeros((400, 400), dtype=bool)
    holes[80:320, 100:300] = True

    def run():
        raster.inpaint(img, holes)

    return f"inpaint ({int(holes.sum())} hole px)", run


def bench_sweep():
    parent = np.zeros((600, 900), dtype=bool)
    parent[50:550, 50:850] = True
    part = np.zeros_like(parent)
    part[280:320, 430:470] = True
    from scipy import ndimage

    ring = parent & ~ndimage.binary_erosion(
        parent, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]), border_value=0
    )
    blocked = ring | ~parent

    def run():
        kernels.first_contact_shift(part, blocked, (-1, 0), 900)

    return "first_contact_shift (600x900 canvas)", run


def main():
    rows = []
    for make in (bench_paint, bench_coverage, bench_inpaint, bench_sweep):
        name, fn = make()
        times = {}
        for label, flag in (("numba", True), ("numpy", False)):
            if flag and not accel.numba_available():
                times[label] = float("nan")
                continue
            prev = accel.set_backend(flag)
            try:
                times[label] = timeit(fn)
            finally:
                accel.set_backend(prev)
        speedup = times["numpy"] / times["numba"] if times["numba"] else float("nan")
        rows.append((name, times["numba"], times["numpy"], speedup))

    print(f"{'kernel':52s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for name, tn, tp, sp in rows:
        print(f"{name:52s} {tn * 1e3:9.2f}ms {tp * 1e3:9.2f}ms {sp:7.1f}x")


if __name__ == "__main__":
    main()
