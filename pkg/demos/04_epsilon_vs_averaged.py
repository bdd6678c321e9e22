"""The epsilon-system against its averaging-homogenization limit.

Runs a reduced version of the main convergence study: the oscillatory
stochastic system at a ladder of scale separations against the deterministic
averaged system built from the effective tensors and the invariant-measure
exchange average.  Replica medians of the path errors decay as epsilon
shrinks.
"""

import numpy as np

from homogflow import parse_config, run_convergence

table = {
    "study": "converge",
    "seed": 2024,
    "mesh": {"dimension": 1, "n": 128, "cell_n": 128},
    "time": {"T": 0.25, "dt": 0.25 / 128},
    "epsilon": {"values": [0.5, 0.25, 0.125, 0.0625]},
    "replicas": {"count": 8},
    "coefficients": {
        "A1": {"kind": "scalar_sin", "base": 2.0, "amplitude": 1.0},
        "A2": {"kind": "scalar_sin", "base": 2.5, "amplitude": 1.0,
               "frequency": 2},
        "alpha": {"kind": "separable", "c0": 0.8, "c1": 0.4,
                  "saturation": "tanh_mix", "w1": 1.0, "w2": -0.7,
                  "nonneg": True},
        "f1": {"kind": "sine_decay", "amplitude": 1.0, "mode": 1},
        "f2": {"kind": "sine_decay", "amplitude": 0.5, "mode": 2},
        "beta": [[1.0, 0.5], [0.5, 1.0]],
    },
    "noise": {"truncation": 16, "sigma1": 0.7, "sigma2": 0.7},
    "initial": {"u1": {"kind": "sine", "mode": 1},
                "u2": {"kind": "sine", "mode": 2, "amplitude": 0.5},
                "v": "invariant"},
    "sdecomp": {"enabled": True, "time_stride": 2},
}

config = parse_config(table)
report = run_convergence(config)

print(f"{'epsilon':>9} {'sup L2 err u1':>14} {'weak H1 err u1':>15} "
      f"{'|S1|':>10} {'|S2|':>10} {'|S3|':>10}")
for eps in config.epsilons:
    print(f"{eps:9.4f} {report.median(eps, 'sup_l2_err_u1'):14.6f} "
          f"{report.median(eps, 'weak_h1_err_u1'):15.6f} "
          f"{np.median(report.values(eps, 's1')):10.6f} "
          f"{np.median(report.values(eps, 's2')):10.6f} "
          f"{np.median(report.values(eps, 's3')):10.6f}")

print("\nmedian decay ratios per halving (sup L2, continuum 1):")
med = report.medians("sup_l2_err_u1")
print(np.round(med[:-1] / med[1:], 3))
