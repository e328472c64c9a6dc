import numpy as np, time
from sinn import problem, train
from sinn.net import Activation

# criterion 8: inverse with quadratic d inside s=3 basis
spec, case = problem.quadratic_inverse_case()
cfg = train.TrainConfig(iterations=1500, optimizer='adam+lbfgs', adam_fraction=0.6,
                        lr=1e-2, lr_decay=0.05, p=6, hidden=(15, 15, 15),
                        activation=Activation.SWISH, n_interior=900, n_boundary=1500,
                        n_test=2000, seed=0)
for noise in (0.0, 0.05):
    t0 = time.perf_counter()
    inv = train.InverseConfig(order=3, fraction=0.2, noise=noise, seed=0)
    bundle, params, rep = train.solve_inverse(spec, case, cfg, inv)
    print(f'inverse noise={noise}: kappa_max_rel {rep.errors["kappa_max_rel"]:.3e} '
          f'kappa_l2 {rep.errors["kappa_l2"]:.3e} rhoc_max {rep.errors["rhoc_max_rel"]:.3e} '
          f'loss {rep.final.total:.2e} {time.perf_counter()-t0:.0f}s', flush=True)
