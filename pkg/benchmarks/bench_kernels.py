"""Time the numba kernels against the pure-numpy reference path.

Two parts:

* per-kernel timings, calling both backend modules directly on the same data
  (numba compile time is excluded by a warm-up call);
* training epochs per second on the desk-scale Fin Ray problem, run in
  subprocesses with PINNRAY_NUMBA=1 and PINNRAY_NUMBA=0 because the backend
  is chosen at import.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--epochs 20] [--width 32]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from pinnray import kernels
from pinnray.geometry import FinRayParams, build_finray, triangulate

EPOCH_SCRIPT = r"""
import json, sys, time
import numpy as np
from pinnray import kernels
from pinnray._alloc import tune_allocator
from pinnray.elasticity import MaterialModel
from pinnray.geometry import FinRayParams, build_finray, sample_boundary, sample_collocation
from pinnray.network import DisplacementNet, NetworkConfig
from pinnray.training import LossWeights, PointSets, loss_and_grad

epochs, width = int(sys.argv[1]), int(sys.argv[2])
tune_allocator()  # as train() does
dom = build_finray(FinRayParams())
sets = PointSets(sample_collocation(dom, 5000, 0), sample_boundary(dom, "base", 1000),
                 [[0.0, 35.0]], [[10.0, 0.0]])
net = DisplacementNet.init(NetworkConfig(layers=4, width=width, seed=0), dom.bbox)
mat = MaterialModel(11.4, 0.45)
loss_and_grad(net, sets, mat, LossWeights(), False)
t = time.perf_counter()
for _ in range(epochs):
    loss_and_grad(net, sets, mat, LossWeights(), False)
print(json.dumps({"backend": kernels.BACKEND_NAME, "s_per_epoch": (time.perf_counter() - t) / epochs}))
"""


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases():
    rng = np.random.default_rng(0)
    n, k = 5000, 32
    P = rng.normal(size=(3, n, k))
    y = np.tanh(P[0])
    A, D, G = (rng.normal(size=(3, n, k)) for _ in range(3))
    mesh = triangulate(build_finray(FinRayParams()), 0.35)
    d_eng = np.array([[14.6, 6.6, 0.0], [6.6, 14.6, 0.0], [0.0, 0.0, 3.9]])
    pts = rng.uniform((0, 0), (30, 90), size=(2000, 2))
    poly = build_finray(FinRayParams()).outer
    return {
        "jet_tanh_fwd": lambda be: be.jet_tanh_fwd(y, P),
        "jet_tanh_bwd": lambda be: be.jet_tanh_bwd(G, y, P),
        "jet_tanh_gate_fwd": lambda be: be.jet_tanh_gate_fwd(y, P, A, D),
        "jet_tanh_gate_bwd": lambda be: be.jet_tanh_gate_bwd(G, y, P, D),
        "cst_element_stiffness": lambda be: be.cst_element_stiffness(mesh.nodes, mesh.triangles, d_eng),
        "locate_points": lambda be: be.locate_points(pts, mesh.nodes, mesh.triangles, 1e-9),
        "points_in_polygon": lambda be: be.points_in_polygon(pts, poly),
    }


def epoch_time(flag, epochs, width):
    env = dict(os.environ, PINNRAY_NUMBA=flag)
    r = subprocess.run([sys.executable, "-c", EPOCH_SCRIPT, str(epochs), str(width)],
                       env=env, capture_output=True, text=True, check=True)
    return json.loads(r.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--width", type=int, default=32)
    args = ap.parse_args()

    if kernels.numba_backend is None:
        sys.exit("numba is not installed; nothing to compare")
    print(f"{'kernel':<24}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, call in kernel_cases().items():
        call(kernels.numba_backend)  # compile
        t_np = best_of(lambda: call(kernels.numpy_backend), args.repeat)
        t_nb = best_of(lambda: call(kernels.numba_backend), args.repeat)
        print(f"{name:<24}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>9.1f}x")

    print(f"\ntraining epoch, Fin Ray desk problem (N_C=5000, L=4, width {args.width}):")
    rows = [epoch_time(flag, args.epochs, args.width) for flag in ("0", "1")]
    for r in rows:
        print(f"  {r['backend']:<6} {r['s_per_epoch']:.3f} s/epoch")
    print(f"  speedup {rows[0]['s_per_epoch'] / rows[1]['s_per_epoch']:.2f}x")


if __name__ == "__main__":
    main()
