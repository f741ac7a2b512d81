"""Train a small denoiser and use it to solve a forward problem.

End-to-end: generate Darcy data, fit the convolutional denoiser (short
budget for demo purposes), then recover the pressure field from sparse
coefficient observations. Expect rough but structured recoveries at this
budget; the full budget in TrainConfig() does noticeably better.

Run:  python3 demos/05_train_and_solve.py   (~3 min)
"""

import numpy as np

from sparsepde import (TrainConfig, default_grf, default_guidance,
                       error_rate_binary, generate_dataset, guided_sample,
                       make_schedule, observe, pde_spec, relative_error,
                       sample_mask, train)
from sparsepde.datasets import generate_sample

size = 32
spec = pde_spec("darcy")
grf = default_grf("darcy")

print("generating 256 training pairs ...")
ds = generate_dataset(spec, grf, 256, size, seed=42)

print("training (800 steps, demo budget) ...")
config = TrainConfig(steps=800)
model, curve = train(ds.samples, "darcy", config, seed=0)
print(f"  loss: {curve[0][1]:.3f} -> {curve[-1][1]:.3f}")

print("solving a forward problem from 3% coefficient observations ...")
rng = np.random.default_rng(np.random.SeedSequence([900, 0]))
gt = generate_sample(spec, grf, size, rng)
mask = sample_mask("uniform-random", round(0.03 * size * size), size,
                   np.random.SeedSequence([901, 0]), channel=0)
obs = observe(gt, mask)
schedule = make_schedule(120)
out = guided_sample(model, schedule, obs, spec, default_guidance("darcy", size),
                    seed=np.random.SeedSequence([902, 0]))
print(f"  solution relative error: {100 * relative_error(out[1], gt[1]):.1f}%")
print(f"  coefficient binary error rate: "
      f"{100 * error_rate_binary(out[0], gt[0], spec.darcy_hi, spec.darcy_lo):.1f}%")
