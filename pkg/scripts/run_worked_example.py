#!/usr/bin/env python3
"""Run the bundled one-step example and print a compact comparison.

Equivalent to `qkalman run configs/worked_example.yaml` but summarizes
the quantum-vs-classical estimates instead of dumping the full report.
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from qkalman.cli import parse_config, run_report  # noqa: E402


def main() -> int:
    config_path = pathlib.Path(__file__).resolve().parents[1] / "configs" / "worked_example.yaml"
    config = parse_config(config_path.read_text())
    report = run_report(config)

    final = report["steps"][-1]
    xq, xc = np.array(final["x_hat_q"]), np.array(final["x_hat_c"])
    pq, pc = np.array(final["P_q_diag"]), np.array(final["P_c_diag"])
    print(f"step {final['step']}")
    print(f"  x_hat quantum   {np.array2string(xq, precision=6)}")
    print(f"  x_hat classical {np.array2string(xc, precision=6)}")
    print(f"  |diff|          {np.array2string(np.abs(xq - xc), precision=2)}")
    print(f"  P diag quantum   {np.array2string(pq, precision=6)}")
    print(f"  P diag classical {np.array2string(pc, precision=6)}")

    meta = report["qsvt"][str(final["step"])]
    print(f"  inversion: kappa_used {meta['kappa_used']:.4g}, "
          f"degree {meta['degree']}, scale {meta['scale']:.6f}, "
          f"solver residual {meta['solver_residual']:.2e}")
    for row in report["ledger"]:
        step, label, alpha, ancillas, eps = row
        print(f"  ledger {label:<13} alpha {alpha:12.6f}  ancillas {ancillas:2d}  "
              f"eps {eps:.3g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
