"""Forward, inverse, and joint PDE recovery from sparse observations.

The package learns (or constructs analytically) joint priors over PDE
coefficient/solution pairs and recovers both fields from sparse pointwise
measurements by guided diffusion sampling, with observation and
PDE-residual losses steering a deterministic second-order ODE sampler.
"""

from .datasets import Dataset, default_grf, generate_dataset, load_dataset, save_dataset
from .denoiser import (TrainConfig, TrainedDenoiser, analytic_denoise,
                       denoiser_vjp, load_checkpoint, nn_denoise,
                       save_checkpoint, score, train)
from .fields import (Field, JointState, SpectralGrid, central_diff, dft2,
                     divergence, idft2, laplacian5, mollifier)
from .gaussian import GaussianPrior, gaussian_joint_prior
from .grf import GrfSpec, sample_grf, sample_grf_1d
from .metrics import MetricsReport, aggregate, error_rate_binary, relative_error
from .observations import ObservationSet, observe, sample_mask
from .pdes import PdeSpec, pde_spec
from .residuals import (Residual, obs_loss, obs_loss_grad, pde_loss,
                        pde_loss_grad, residual_burgers, residual_darcy,
                        residual_for, residual_helmholtz, residual_ns)
from .sampler import (GuidanceConfig, Schedule, Trajectory, default_guidance,
                      guided_sample, heun_step, make_schedule,
                      paper_guidance_weights)
from .solvers import (binarize_darcy, simulate_burgers, simulate_ns_vorticity,
                      solve_darcy, solve_helmholtz)

__version__ = "0.1.0"
