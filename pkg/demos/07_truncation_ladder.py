"""Truncation ladder: gluing along exit times and p-th moment stabilization.

Coefficients frozen beyond level n give globally tame problems; on a common
path the ladder trajectories agree bitwise until the state leaves the
smaller level, the exit times rho_n are nondecreasing, and the p = 4 moment
estimates stabilize once the level exceeds the dynamics' actual range.
"""

import numpy as np

import srds

grid = srds.build_grid(1, [1.0], [32])
op = srds.assemble_operator(grid, srds.CoefficientField.constant(grid, a=1.0))
basis = srds.cosine_neumann_basis(grid, 8)
lam = 0.5 * (np.arange(8) + 1.0) ** -2.0
noise = srds.build_noise([basis] * 2, [lam] * 2, [srds.named_g("sqrt-abs")] * 2)
problem = srds.Problem(grid=grid, operators=(op, op),
                       reaction=srds.fhn_system(1.0, 1.0), noise=noise)
init = np.full((2, 32), 0.5)

cfg = srds.SolverConfig(dt=1e-3, t_end=0.25, store_stride=1)
print("gluing on 4 paths, levels {1, 2, 4, 8}:")
for p in range(4):
    path = srds.sample_path(5, 2, 8, 250, 1e-3, path_index=p)
    glued, ladder = srds.glue_ladder(problem, cfg, path, init,
                                     [1.0, 2.0, 4.0, 8.0])
    print(f"  path {p}: exit times rho_n = "
          f"{[f'{t:.3f}' for t in ladder.exit_times]}  "
          f"consistent = {ladder.consistent}")

cfg2 = srds.SolverConfig(dt=2e-3, t_end=0.5)
report = srds.moment_experiment(problem, cfg2, 4.0, [4.0, 8.0, 16.0, 32.0],
                                16, init, master_seed=5)
print("\np = 4 moment estimates along the ladder (common paths):")
for level, m in report.aggregates["m_n"].items():
    frac = report.aggregates["exit_fractions"][level]
    print(f"  level {float(level):4g}: m_n = {m:.6f}   exit fraction {frac:.2f}")
print(f"paths never leaving the smallest level: "
      f"{report.aggregates['never_exit_smallest']}/16 (their statistics agree "
      f"bitwise across levels)")
print(f"verdict: {'pass' if report.verdict else 'fail'}")
