import numpy as np, time, dataclasses
from sinn import problem, train
from sinn.net import Activation

def run(name, spec, case, cfg, seeds=(0,1,2)):
    errs = []
    for s in seeds:
        c = dataclasses.replace(cfg, seed=s)
        t0 = time.perf_counter()
        state = train.CarriedState.initial(spec)
        bundle, rep = train.solve_subinterval(spec, state, spec.time_interval[1], c, case=case)
        errs.append(rep.errors['u_l2_end'])
        print(f'{name} seed {s}: u {rep.errors["u_l2_end"]:.3e} ux {rep.errors["ux_l2_end"]:.3e} loss {rep.final.total:.2e} {time.perf_counter()-t0:.0f}s', flush=True)
    print(f'{name} MEDIAN u: {np.median(errs):.3e}', flush=True)

# criterion 6b: sine-Gordon case I (t in [0,1], p=5)
spec, case = problem.builtin_case('wave_sine_gordon')
cfg = train.TrainConfig(iterations=1500, optimizer='adam+lbfgs', adam_fraction=0.6,
                        lr=1e-2, lr_decay=0.05, p=5, hidden=(15, 15, 15),
                        activation=Activation.SWISH, n_interior=1200, n_boundary=1500,
                        n_test=2000)
run('sine_gordon_I', spec, case, cfg)

# criterion 6b': case II (t in [0,2], p=10)
spec2 = dataclasses.replace(spec, time_interval=(0.0, 2.0))
cfg2 = dataclasses.replace(cfg, p=10)
run('sine_gordon_II', spec2, case, cfg2)
