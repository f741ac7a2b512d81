"""Command-line front end: generate, train, solve, ablate, render.

Configuration comes from an INI-style config file (``key = value`` under
sections, all sections flattened) overridden by command-line flags. A
12-hex-character digest of the resolved configuration is stamped into every
text output; binary artifacts (datasets, prediction stacks) get a sidecar
``.manifest.txt`` carrying the same digest.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import configparser
import csv
import hashlib
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .datasets import default_grf, generate_dataset, generate_sample, \
    load_dataset, save_dataset
from .denoiser import TrainConfig, TrainingError, load_checkpoint, \
    save_checkpoint, train
from .gaussian import gaussian_joint_prior
from .metrics import aggregate, error_rate_binary, relative_error
from .observations import observe, sample_mask
from .pdes import FAMILIES, pde_spec
from .pgm import render_heatmap
from .residuals import pde_loss, residual_for
from .sampler import GuidanceConfig, SamplingError, default_guidance, \
    guided_sample, make_schedule
from .solvers import IntegrationError, SolverError

__all__ = ["main", "RunConfig"]

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


@dataclass
class RunConfig:
    """Everything one command needs; digest-stamped into outputs."""

    family: str = "poisson"
    size: int = 32
    count: int = 100
    dataset: str = ""
    checkpoint: str = ""
    backend: str = "analytic"
    direction: str = "forward"
    n_obs: str = "3%"
    pattern: str = "uniform-random"
    noise: float = 0.0
    scenes: int = 8
    seed: int = 0
    steps: int = 80                  # sampler steps
    sigma_min: float = 0.002
    sigma_max: float = 80.0
    rho: float = 7.0
    zeta_obs_a: float = -1.0         # -1 means family default
    zeta_obs_u: float = -1.0
    zeta_pde: float = -1.0
    switch_fraction: float = 0.8
    obs_divisor: float = 10.0
    train_steps: int = 1500
    train_batch: int = 16
    train_lr: float = 0.02
    train_base: int = 16
    heatmaps: int = 2
    jobs: int = 1
    unconditional: bool = False
    trajectory: bool = False
    out: str = "out"

    def digest(self) -> str:
        text = "\n".join(f"{k}={v}" for k, v in sorted(asdict(self).items()))
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    def obs_count(self) -> int:
        """Observed points per channel; for sensors, the sensor count."""
        s = str(self.n_obs).strip()
        base = self.size if self.pattern == "sensors" else self.size * self.size
        if s.endswith("%"):
            return max(1, round(float(s[:-1]) / 100.0 * base))
        return int(s)

    def guidance(self) -> GuidanceConfig:
        base = default_guidance(self.family, self.size)
        zo = base.obs_weights(2 if self.family != "burgers" else 1)
        za = self.zeta_obs_a if self.zeta_obs_a >= 0 else zo[0]
        zu = self.zeta_obs_u if self.zeta_obs_u >= 0 else zo[-1]
        zp = self.zeta_pde if self.zeta_pde >= 0 else base.zeta_pde
        zeta_obs = za if self.family == "burgers" else (za, zu)
        return GuidanceConfig(zeta_obs=zeta_obs, zeta_pde=zp,
                              switch_fraction=self.switch_fraction,
                              post_switch_obs_divisor=self.obs_divisor)


def _load_config_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError(f"config file {path!r} not found")
    flat = {}
    for section in parser.sections():
        flat.update(dict(parser.items(section)))
    return flat


def _build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        for k, v in _load_config_file(args.config).items():
            if not hasattr(cfg, k):
                raise ValueError(f"unknown config key {k!r}")
            cur = getattr(cfg, k)
            cast = type(cur) if not isinstance(cur, bool) else \
                (lambda s: s.lower() in ("1", "true", "yes"))
            setattr(cfg, k, cast(v))
    for k, v in vars(args).items():
        if v is not None and hasattr(cfg, k):
            setattr(cfg, k, v)
    if cfg.family not in FAMILIES:
        raise ValueError(f"unknown family {cfg.family!r}")
    if cfg.direction not in ("forward", "inverse", "joint"):
        raise ValueError(f"unknown direction {cfg.direction!r}")
    if cfg.backend not in ("analytic", "nn"):
        raise ValueError(f"unknown backend {cfg.backend!r}")
    return cfg


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(path: Path, cfg: RunConfig, extra: dict | None = None):
    with open(path, "w") as f:
        f.write(f"config_digest={cfg.digest()}\n")
        for k, v in sorted(asdict(cfg).items()):
            f.write(f"{k}={v}\n")
        for k, v in (extra or {}).items():
            f.write(f"{k}={v}\n")


# ---------------------------------------------------------------------------
# generate

def cmd_generate(cfg: RunConfig) -> int:
    spec = pde_spec(cfg.family)
    grf = default_grf(cfg.family)
    ds = generate_dataset(spec, grf, cfg.count, cfg.size, cfg.seed)
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out)
    _write_manifest(Path(str(out) + ".manifest.txt"), cfg)
    res = [pde_loss(residual_for(spec, s)) for s in ds.samples]
    print(f"wrote {out} ({ds.count} samples, {cfg.family} @ {cfg.size})")
    print(f"residual mean-square: mean={np.mean(res):.3e} max={np.max(res):.3e} "
          f"[config {cfg.digest()}]")
    return 0


# ---------------------------------------------------------------------------
# train

def cmd_train(cfg: RunConfig) -> int:
    if not cfg.dataset:
        raise ValueError("train needs --dataset")
    ds = load_dataset(cfg.dataset)
    if ds.resolution != cfg.size:
        raise ValueError(f"dataset resolution {ds.resolution} != --size {cfg.size}")
    tc = TrainConfig(steps=cfg.train_steps, batch=cfg.train_batch,
                     lr=cfg.train_lr, base=cfg.train_base)
    model, curve = train(ds.samples, ds.spec.family, tc, seed=cfg.seed)
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out, tc, digest=cfg.digest(),
                    extra={"dataset": cfg.dataset, "seed": cfg.seed})
    with open(str(out) + ".loss.csv", "w", newline="") as f:
        f.write(f"# config={cfg.digest()}\n")
        w = csv.writer(f)
        w.writerow(["step", "loss"])
        w.writerows(curve)
    print(f"wrote {out} (final loss {curve[-1][1]:.4f}) [config {cfg.digest()}]")
    return 0


# ---------------------------------------------------------------------------
# solve

def _scene_state(cfg: RunConfig, prior, spec, grf, scene: int) -> np.ndarray:
    if cfg.backend == "analytic":
        return prior.sample(np.random.SeedSequence([cfg.seed, scene, 0]))
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, scene, 0]))
    return generate_sample(spec, grf, cfg.size, rng)


def _scene_mask(cfg: RunConfig, channels: int, scene: int):
    n = cfg.obs_count()
    chans = {"forward": [0], "inverse": [1], "joint": [0, 1]}[cfg.direction]
    if channels == 1:
        chans = [0]
    picks = []
    for c in chans:
        picks.append(sample_mask(cfg.pattern, n, cfg.size,
                                 np.random.SeedSequence([cfg.seed, scene, 1, c]),
                                 channel=c))
    return tuple(np.concatenate([p[i] for p in picks]) for i in range(3))


def _solve_scene(cfg: RunConfig, backend, spec, prior, grf, schedule,
                 guidance, scene: int):
    gt = _scene_state(cfg, prior, spec, grf, scene)
    if cfg.unconditional:
        from .observations import ObservationSet
        obs = ObservationSet.empty()
    else:
        mask = _scene_mask(cfg, gt.shape[0], scene)
        obs = observe(gt, mask, noise_level=cfg.noise,
                      seed=np.random.SeedSequence([cfg.seed, scene, 2]),
                      pattern=cfg.pattern)
    result = guided_sample(backend, schedule, obs, spec, guidance,
                           seed=np.random.SeedSequence([cfg.seed, scene, 3]),
                           record=cfg.trajectory)
    if cfg.trajectory:
        pred, traj = result
        return gt, pred, traj
    return gt, result, None


def _scene_errors(cfg: RunConfig, gt: np.ndarray, pred: np.ndarray):
    if cfg.family == "darcy":
        spec = pde_spec("darcy")
        err_a = error_rate_binary(pred[0], gt[0], spec.darcy_hi, spec.darcy_lo)
    else:
        err_a = relative_error(pred[0], gt[0])
    err_u = relative_error(pred[-1], gt[-1])
    return err_a, err_u


def _solve_backend(cfg: RunConfig):
    spec = pde_spec(cfg.family)
    grf = default_grf(cfg.family)
    prior = None
    if cfg.backend == "analytic":
        if cfg.family not in ("poisson", "helmholtz"):
            raise ValueError("analytic backend exists only for poisson/helmholtz")
        prior = gaussian_joint_prior(cfg.family, cfg.size)
        backend = prior
        spec = prior.pde()
    else:
        if not cfg.checkpoint:
            raise ValueError("nn backend needs --checkpoint")
        backend = load_checkpoint(cfg.checkpoint)
        if backend.size != cfg.size:
            raise ValueError(f"checkpoint is {backend.size}x{backend.size}, "
                             f"--size is {cfg.size}")
        if backend.family != cfg.family:
            raise ValueError(f"checkpoint family {backend.family!r} != "
                             f"--family {cfg.family!r}")
    return backend, spec, prior, grf


def cmd_solve(cfg: RunConfig) -> int:
    backend, spec, prior, grf = _solve_backend(cfg)
    schedule = make_schedule(cfg.steps, cfg.sigma_min, cfg.sigma_max, cfg.rho)
    guidance = cfg.guidance()
    out = _outdir(cfg)

    def one(scene: int):
        return scene, _solve_scene(cfg, backend, spec, prior, grf, schedule,
                                   guidance, scene)

    results = []
    if cfg.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(one, range(cfg.scenes)))
    else:
        results = [one(s) for s in range(cfg.scenes)]
    results.sort(key=lambda r: r[0])

    rows = []
    preds = []
    for scene, (gt, pred, traj) in results:
        preds.append(pred)
        if traj is not None:
            with open(out / f"trajectory{scene:04d}.csv", "w", newline="") as f:
                f.write(f"# config={cfg.digest()}\n")
                w = csv.writer(f)
                w.writerow(["step", "sigma", "L_obs", "L_pde"])
                for i, sig, lo, lp in traj.rows():
                    w.writerow([i, f"{sig:.6g}", f"{lo:.6g}", f"{lp:.6g}"])
        if not cfg.unconditional:
            err_a, err_u = _scene_errors(cfg, gt, pred)
            rows.append([scene, cfg.family, cfg.direction, cfg.pattern,
                         cfg.obs_count(), cfg.noise, f"{err_a:.6f}", f"{err_u:.6f}"])
        if scene < cfg.heatmaps:
            for ci in range(pred.shape[0]):
                tag = "au"[ci] if pred.shape[0] == 2 else "u"
                render_heatmap(pred[ci], out / f"scene{scene:04d}_pred_{tag}.pgm",
                               comment=f"config={cfg.digest()}")
                render_heatmap(gt[ci], out / f"scene{scene:04d}_gt_{tag}.pgm",
                               comment=f"config={cfg.digest()}")

    np.save(out / "predictions.npy", np.stack(preds).astype(np.float32))
    _write_manifest(out / "run.manifest.txt", cfg)
    if not cfg.unconditional:
        with open(out / "metrics.csv", "w", newline="") as f:
            f.write(f"# config={cfg.digest()}\n")
            w = csv.writer(f)
            w.writerow(["scene_id", "family", "direction", "pattern",
                        "n_obs", "noise", "err_a", "err_u"])
            w.writerows(rows)
        ra = aggregate([float(r[6]) for r in rows]) if len(rows) > 1 else None
        ru = aggregate([float(r[7]) for r in rows]) if len(rows) > 1 else None
        if ra and ru:
            print(f"err_a: {ra}   err_u: {ru} [config {cfg.digest()}]")
    print(f"wrote {out}/")
    return 0


# ---------------------------------------------------------------------------
# ablate

def cmd_ablate(cfg: RunConfig, sweep: str) -> int:
    out = _outdir(cfg)
    rows = []

    def run(mut: RunConfig):
        backend, spec, prior, grf = _solve_backend(mut)
        schedule = make_schedule(mut.steps, mut.sigma_min, mut.sigma_max, mut.rho)
        guidance = mut.guidance()
        errs_a, errs_u = [], []
        for scene in range(mut.scenes):
            gt, pred, _ = _solve_scene(mut, backend, spec, prior, grf,
                                       schedule, guidance, scene)
            ea, eu = _scene_errors(mut, gt, pred)
            errs_a.append(ea)
            errs_u.append(eu)
        return (float(np.median(errs_a)), float(np.median(errs_u)),
                float(np.mean(errs_a)), float(np.mean(errs_u)))

    if sweep == "n_obs":
        for frac in ("1%", "3%", "6%"):
            for direction in ("forward", "inverse", "joint"):
                mut = RunConfig(**{**asdict(cfg), "n_obs": frac,
                                   "direction": direction})
                rows.append([frac, direction, *run(mut)])
        header = ["n_obs", "direction", "median_err_a", "median_err_u",
                  "mean_err_a", "mean_err_u"]
    elif sweep == "noise":
        for nl in (0.0, 0.05, 0.15):
            mut = RunConfig(**{**asdict(cfg), "noise": nl})
            rows.append([nl, *run(mut)])
        header = ["noise", "median_err_a", "median_err_u", "mean_err_a",
                  "mean_err_u"]
    elif sweep == "pattern":
        for pat in ("uniform-random", "regular-grid", "concentrated"):
            mut = RunConfig(**{**asdict(cfg), "pattern": pat})
            rows.append([pat, *run(mut)])
        header = ["pattern", "median_err_a", "median_err_u", "mean_err_a",
                  "mean_err_u"]
    elif sweep == "pde_loss":
        for zp, label in ((0.0, "obs-only"), (-1.0, "obs+pde")):
            mut = RunConfig(**{**asdict(cfg), "zeta_pde": zp,
                               "direction": "joint"})
            rows.append([label, *run(mut)])
        header = ["loss", "median_err_a", "median_err_u", "mean_err_a",
                  "mean_err_u"]
    elif sweep == "resolution":
        for size in (16, 32, 64):
            for direction in ("forward", "inverse"):
                mut = RunConfig(**{**asdict(cfg), "size": size,
                                   "direction": direction})
                rows.append([size, direction, *run(mut)])
        header = ["resolution", "direction", "median_err_a", "median_err_u",
                  "mean_err_a", "mean_err_u"]
    else:
        raise ValueError(f"unknown sweep {sweep!r}")

    path = out / f"ablate_{sweep}.csv"
    with open(path, "w", newline="") as f:
        f.write(f"# config={cfg.digest()}\n")
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# render

def cmd_render(cfg: RunConfig, source: str) -> int:
    arr = np.load(source)
    arr = np.asarray(arr, dtype=np.float64)
    out = _outdir(cfg)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    flat = arr.reshape(-1, arr.shape[-2], arr.shape[-1])
    for i, fld in enumerate(flat):
        render_heatmap(fld, out / f"render_{i:04d}.pgm",
                       comment=f"config={cfg.digest()}")
    print(f"wrote {len(flat)} heatmaps to {out}/")
    return 0


# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparsepde",
                                description="PDE recovery from sparse "
                                            "observations with guided diffusion")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--family", choices=FAMILIES)
        sp.add_argument("--size", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")

    g = sub.add_parser("generate", help="generate a dataset file")
    common(g)
    g.add_argument("--count", type=int)

    t = sub.add_parser("train", help="train a denoiser on a dataset")
    common(t)
    t.add_argument("--dataset")
    t.add_argument("--train-steps", dest="train_steps", type=int)
    t.add_argument("--train-batch", dest="train_batch", type=int)
    t.add_argument("--train-lr", dest="train_lr", type=float)
    t.add_argument("--train-base", dest="train_base", type=int)

    s = sub.add_parser("solve", help="recover fields from sparse observations")
    common(s)
    s.add_argument("--backend", choices=("analytic", "nn"))
    s.add_argument("--checkpoint")
    s.add_argument("--direction", choices=("forward", "inverse", "joint"))
    s.add_argument("--n-obs", dest="n_obs")
    s.add_argument("--pattern", choices=("uniform-random", "regular-grid",
                                         "concentrated", "sensors"))
    s.add_argument("--noise", type=float)
    s.add_argument("--scenes", type=int)
    s.add_argument("--steps", type=int)
    s.add_argument("--jobs", type=int)
    s.add_argument("--zeta-obs-a", dest="zeta_obs_a", type=float)
    s.add_argument("--zeta-obs-u", dest="zeta_obs_u", type=float)
    s.add_argument("--zeta-pde", dest="zeta_pde", type=float)
    s.add_argument("--unconditional", action="store_true", default=None)
    s.add_argument("--trajectory", action="store_true", default=None,
                   help="dump per-step guidance losses per scene")
    s.add_argument("--heatmaps", type=int)

    a = sub.add_parser("ablate", help="run a sweep mirroring the analyses")
    common(a)
    a.add_argument("--sweep", required=True,
                   choices=("n_obs", "noise", "pattern", "pde_loss",
                            "resolution"))
    a.add_argument("--backend", choices=("analytic", "nn"))
    a.add_argument("--checkpoint")
    a.add_argument("--direction", choices=("forward", "inverse", "joint"))
    a.add_argument("--n-obs", dest="n_obs")
    a.add_argument("--noise", type=float)
    a.add_argument("--scenes", type=int)
    a.add_argument("--steps", type=int)

    r = sub.add_parser("render", help="export .npy fields as PGM heatmaps")
    common(r)
    r.add_argument("--input", required=True)

    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _build_config(args)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "ablate":
            return cmd_ablate(cfg, args.sweep)
        if args.command == "render":
            return cmd_render(cfg, args.input)
        raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverError, IntegrationError, SamplingError, TrainingError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
