import numpy as np, time, dataclasses
from sinn import problem, train
from sinn.net import Activation

def one(name, spec, case, cfg, seed=0):
    c = dataclasses.replace(cfg, seed=seed)
    t0 = time.perf_counter()
    state = train.CarriedState.initial(spec)
    bundle, rep = train.solve_subinterval(spec, state, spec.time_interval[1], c, case=case)
    print(f'{name}: u {rep.errors["u_l2_end"]:.3e} ux {rep.errors["ux_l2_end"]:.3e} '
          f'loss {rep.final.total:.2e} hist {len(rep.loss_history)} {time.perf_counter()-t0:.0f}s', flush=True)

# --- heat_nl_a variants (criterion 5: <=2000 Adam iterations) ---
spec, case = problem.builtin_case('heat_nl_a')
base = train.TrainConfig(iterations=2000, optimizer='adam', p=5,
                         activation=Activation.SWISH, n_test=2000,
                         n_interior=800, n_boundary=1200, hidden=(15,15))
one('nl_a lr5e-2 d0.2 (15,15) 800', spec, case, dataclasses.replace(base, lr=5e-2, lr_decay=0.2))
one('nl_a lr3e-2 const (15,15) 800', spec, case, dataclasses.replace(base, lr=3e-2, lr_decay=1.0))
one('nl_a lr1e-1 d0.05 (15,15) 800', spec, case, dataclasses.replace(base, lr=1e-1, lr_decay=0.05))

# --- wave_linear variants (criterion 6: optimizer free) ---
spec, case = problem.builtin_case('wave_linear')
wbase = train.TrainConfig(iterations=1500, p=5, hidden=(10,10,10),
                          activation=Activation.MISH, n_interior=1500,
                          n_boundary=1500, n_test=2000)
one('wave pure lbfgs 1500 m30', spec, case,
    dataclasses.replace(wbase, optimizer='lbfgs', lbfgs_memory=30))
one('wave adam0.1 lr1e-3 + lbfgs', spec, case,
    dataclasses.replace(wbase, optimizer='adam+lbfgs', adam_fraction=0.1, lr=1e-3, lr_decay=1.0, lbfgs_memory=30))

# --- inverse variants (criterion 8: optimizer free) ---
spec, case = problem.quadratic_inverse_case()
ibase = train.TrainConfig(p=6, hidden=(15,15,15), activation=Activation.SWISH,
                          n_interior=900, n_boundary=1500, n_test=2000)
for iters, lr, dec, af in [(3500, 5e-2, 0.1, 0.6), (3000, 3e-2, 0.2, 0.5)]:
    cfg = dataclasses.replace(ibase, iterations=iters, optimizer='adam+lbfgs',
                              adam_fraction=af, lr=lr, lr_decay=dec)
    t0 = time.perf_counter()
    _, params, rep = train.solve_inverse(spec, case, cfg, train.InverseConfig(order=3, fraction=0.2, noise=0.0, seed=0))
    print(f'inv it{iters} lr{lr} d{dec} af{af}: kmax {rep.errors["kappa_max_rel"]:.3e} '
          f'loss {rep.final.total:.2e} hist {len(rep.loss_history)} {time.perf_counter()-t0:.0f}s', flush=True)
