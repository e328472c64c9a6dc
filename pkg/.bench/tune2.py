import numpy as np, time, dataclasses
from sinn import problem, train
from sinn.net import Activation

def one(name, spec, case, cfg, seed=0):
    c = dataclasses.replace(cfg, seed=seed)
    t0 = time.perf_counter()
    state = train.CarriedState.initial(spec)
    bundle, rep = train.solve_subinterval(spec, state, spec.time_interval[1], c, case=case)
    print(f'{name}: u {rep.errors["u_l2_end"]:.3e} ux {rep.errors["ux_l2_end"]:.3e} '
          f'loss {rep.final.total:.2e} {time.perf_counter()-t0:.0f}s', flush=True)

spec, case = problem.builtin_case('heat_nl_a')
base = train.TrainConfig(iterations=2000, optimizer='adam', p=5,
                         activation=Activation.SWISH, n_test=2000,
                         n_interior=800, n_boundary=1200, hidden=(15,15))
one('nl_a b2=.99 lr1e-1 d.02', spec, case, dataclasses.replace(base, lr=1e-1, lr_decay=0.02, beta2=0.99))
one('nl_a b2=.99 lr2e-1 d.02', spec, case, dataclasses.replace(base, lr=2e-1, lr_decay=0.02, beta2=0.99))
one('nl_a b2=.999 lr1e-1 d.02', spec, case, dataclasses.replace(base, lr=1e-1, lr_decay=0.02))

# wave_linear via subinterval marching (p=5 per step)
spec, case = problem.builtin_case('wave_linear')
for nsteps, iters in [(5, 500), (4, 600)]:
    cfg = train.TrainConfig(iterations=iters, optimizer='adam+lbfgs', adam_fraction=0.3,
                            lr=1e-2, lr_decay=0.1, p=5, hidden=(10,10,10),
                            activation=Activation.MISH, n_interior=1500,
                            n_boundary=1500, n_test=2000, seed=0)
    t0 = time.perf_counter()
    state, reports = train.march(spec, cfg, n_steps=nsteps, case=case)
    errs = [r.errors['u_l2_end'] for r in reports]
    print(f'wave march {nsteps}x{1.0/nsteps}: final u {errs[-1]:.3e} steps {["%.1e"%e for e in errs]} {time.perf_counter()-t0:.0f}s', flush=True)
