"""Canonical model constants, random-field parameter sets and surrogate
presets for the two benchmark regimes.

Case 1 (b=1.7) relaxes to the stable uniform state; 20 snapshots are kept.
Case 2 (b=3.0) enters a limit cycle with a sharp transition; 10 snapshots
cover one oscillation. Each case has a train/test parameter set plus two
out-of-distribution sets: ood1 shrinks the correlation length scales
(rougher fields, harder), ood2 grows them (smoother fields, easier).
"""

from __future__ import annotations

from .core import CaseLabel, Scheme, SolverParams
from .grf import KLEConfig
from .kpca import KernelSpec
from .pipeline import MPCEConfig

__all__ = [
    "solver_params",
    "kle_config",
    "surrogate_preset",
    "SURROGATE_PRESETS",
    "KLE_PARAMS",
]

_CASE_B = {"case1": 1.7, "case2": 3.0}
_CASE_NT = {"case1": 20, "case2": 10}

# (l_x, l_y, sigma2) per (case, split)
KLE_PARAMS = {
    ("case1", "train"): (0.11, 0.15, 0.15),
    ("case1", "ood1"): (0.09, 0.20, 0.18),
    ("case1", "ood2"): (0.35, 0.20, 0.15),
    ("case2", "train"): (0.35, 0.20, 0.15),
    ("case2", "ood1"): (0.25, 0.15, 0.15),
    ("case2", "ood2"): (0.45, 0.40, 0.15),
}

# (d_in, d_out) per (case, preset); s_max=2 throughout
SURROGATE_PRESETS = {
    ("case1", "u-mpce"): (18, 20),
    ("case1", "o-mpce"): (30, 45),
    ("case2", "u-mpce"): (25, 40),
    ("case2", "o-mpce"): (23, 105),
}


def solver_params(case: str, scheme: Scheme = Scheme.EXPLICIT_SUBSTEP) -> SolverParams:
    if case not in _CASE_B:
        raise ValueError(f"unknown case {case!r} (expected 'case1' or 'case2')")
    return SolverParams(a=1.0, b=_CASE_B[case], D0=1.0, D1=0.5,
                        dt_output=1e-2, t_end=1.0, nt=_CASE_NT[case], scheme=scheme)


def kle_config(case: str, split: str, seed: int = 0) -> KLEConfig:
    """split is 'train' (also used for the test draw), 'ood1' or 'ood2'."""
    key = (case, "train" if split == "test" else split)
    if key not in KLE_PARAMS:
        raise ValueError(f"no random-field parameters for {key}")
    l_x, l_y, sigma2 = KLE_PARAMS[key]
    return KLEConfig(l_x=l_x, l_y=l_y, sigma2=sigma2, seed=seed)


def surrogate_preset(case: str, name: str) -> MPCEConfig:
    """u-mpce / o-mpce configurations: rbf input reduction, cubic poly
    output reduction, degree-2 expansion.

    The free hyperparameters were calibrated once on the benchmark
    datasets and are fixed here: a wide input kernel (gamma_scale=0.03,
    i.e. ~30x wider than the variance heuristic) keeps the trailing latent
    components informative and out-of-sample projections stable, and the
    decoder is linear-kernel ridge regression at 1e-6, which extrapolates
    smoother-than-training trajectories without saturating. All values are
    stored with every fitted model.
    """
    key = (case, name)
    if key not in SURROGATE_PRESETS:
        raise ValueError(f"unknown preset {key}")
    d_in, d_out = SURROGATE_PRESETS[key]
    return MPCEConfig(
        d_in=d_in,
        d_out=d_out,
        input_kernel=KernelSpec("rbf", gamma_scale=0.03),
        output_kernel=KernelSpec("poly"),
        s_max=2,
        pce_penalty=1e-8,
        inverse_kernel=KernelSpec("linear"),
        inverse_ridge=1e-6,
    )


def split_label(case: str, split: str) -> CaseLabel:
    if split in ("train", "test"):
        return CaseLabel.CASE_I if case == "case1" else CaseLabel.CASE_II
    return CaseLabel(split)
