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
        print(f'{name} seed {s}: u {rep.errors["u_l2_end"]:.3e} ux {rep.errors["ux_l2_end"]:.3e} '
              f'uy {rep.errors["uy_l2_end"]:.3e} uz {rep.errors["uz_l2_end"]:.3e} loss {rep.final.total:.2e} {time.perf_counter()-t0:.0f}s', flush=True)
    print(f'{name} MEDIAN u: {np.median(errs):.3e}', flush=True)

# criterion 5: heat_nl_a, same protocol as 4 (<=2000 adam iters)
spec, case = problem.builtin_case('heat_nl_a')
cfg = train.TrainConfig(iterations=2000, optimizer='adam', lr=3e-2, lr_decay=0.03,
                        p=5, hidden=(10, 10), activation=Activation.SWISH,
                        n_interior=500, n_boundary=1200, n_test=2000)
run('heat_nl_a', spec, case, cfg)

# criterion 6a: wave_linear on the cylinder
spec, case = problem.builtin_case('wave_linear')
cfg = train.TrainConfig(iterations=1500, optimizer='adam+lbfgs', adam_fraction=0.6,
                        lr=1e-2, lr_decay=0.05, p=5, hidden=(10, 10, 10),
                        activation=Activation.MISH, n_interior=1500, n_boundary=1500,
                        n_test=2000)
run('wave_linear', spec, case, cfg)
