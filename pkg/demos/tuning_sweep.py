"""Tune inflation and jitter on a small grid and print the RMSE surface."""

import numpy as np

from meshenkf import ExperimentConfig, make_nature, sweep

cfg = ExperimentConfig(model="bgm", scheme="hra", sigma_pert=0.1, master_seed=3)
alpha_grid = [1.0, 1.2, 1.4]
alpha_j_grid = [0.0, 0.02, 0.06]

nature = make_nature(cfg)
result = sweep(cfg, alpha_grid, alpha_j_grid, nature=nature)

print("time-averaged analysis RMSE (rows: alpha_J, cols: alpha)\n")
header = "alpha_J \\ alpha " + "".join(f"{a:>10.2f}" for a in alpha_grid)
print(header)
for aj in alpha_j_grid:
    row = f"{aj:>15.2f} "
    for a in alpha_grid:
        cell = result.cell(a, aj)
        row += (
            f"{'fail':>10}"
            if cell.record.failed
            else f"{cell.record.analysis_summary.rmse:>10.5f}"
        )
    print(row)

print(
    f"\nbest: alpha={result.best_alpha}, alpha_J={result.best_alpha_j} "
    f"-> RMSE {result.best_rmse:.5f} ({result.n_failed} failed cells)"
)
