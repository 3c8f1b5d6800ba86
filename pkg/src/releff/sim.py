"""Data-generating processes and the Monte Carlo scenario runner.

Event times are Weibull with subject-specific scale exp(g0 + g'Z) and a
group-specific shape; censoring times are uniform on [0, b_j].  Scenario
runs report rejection rates of the bootstrap tests for the first covariate
coefficient of each group at the 5% level.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .inference import FitSpec, WarpSpeedResult, warp_speed
from .survival import TwoSampleDataset

__all__ = [
    "Scenario",
    "make_scenario",
    "gen_covariates",
    "gen_event_times",
    "gen_censoring",
    "simulate_dataset",
    "true_theta_weibull_equal_shapes",
    "warp_speed_harness",
    "run_scenario",
    "censoring_rate",
    "scenario_from_json",
    "write_result_rows",
]

# Read "N(0, v)" as variance v throughout (bivariate blocks are covariance
# matrices); replace with the identity to reinterpret v as a standard deviation.
def _var_to_sd(v: float) -> float:
    return float(np.sqrt(v))

CENSOR_BOUNDS = (10.0, 15.0)

SHAPES = {"I": (2.0, 3.0), "II": (3.0, 3.0)}

_SCENARIO_GAMMAS = {
    "i": (2, 0.0, 0.0, (0.0, 0.0), (0.0, 0.0)),
    "ii": (2, 0.0, 0.0, (0.2, 0.0), (0.0, 0.5)),
    "iii": (4, 0.0, 0.0, (0.0, 0.0, 0.0, 0.0), (0.0, 0.0, 0.0, 0.0)),
    "iv": (4, 0.0, 0.0, (0.0, 0.2, 0.4, 0.6), (-0.2, 0.4, -0.6, 0.0)),
}

# which alternative holds per scenario: (group-1 first coefficient, group-2 first)
SCENARIO_HYPOTHESES = {
    "i": ("H0", "H0"),
    "ii": ("H1", "H0"),
    "iii": ("H0", "H0"),
    "iv": ("H0", "H1"),
}


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    setting: str
    n1: int
    n2: int
    censored: bool
    gamma10: float
    gamma20: float
    gamma1: np.ndarray
    gamma2: np.ndarray
    k1: float
    k2: float
    censor_bounds: tuple = CENSOR_BOUNDS
    tau: float = np.inf

    @property
    def p(self) -> int:
        return self.gamma1.size

    @property
    def coefficient_indices(self) -> tuple:
        """Positions of the first covariate coefficient of each group in beta."""
        return 1, 1 + self.p


def make_scenario(scenario_id: str, setting: str, n1: int, n2: int, censored: bool) -> Scenario:
    if scenario_id not in _SCENARIO_GAMMAS:
        raise ValueError(f"unknown scenario {scenario_id!r}")
    if setting not in SHAPES:
        raise ValueError(f"unknown setting {setting!r}")
    _, g10, g20, g1, g2 = _SCENARIO_GAMMAS[scenario_id]
    k1, k2 = SHAPES[setting]
    return Scenario(
        scenario_id=scenario_id, setting=setting, n1=n1, n2=n2, censored=censored,
        gamma10=g10, gamma20=g20,
        gamma1=np.asarray(g1, dtype=float), gamma2=np.asarray(g2, dtype=float),
        k1=k1, k2=k2,
    )


def scenario_from_json(path) -> Scenario:
    """Load a scenario from a JSON configuration file."""
    with open(path) as fh:
        cfg = json.load(fh)
    return make_scenario(
        scenario_id=cfg["scenario"], setting=cfg["setting"],
        n1=int(cfg["n1"]), n2=int(cfg["n2"]), censored=bool(cfg["censored"]),
    )


def _bernoulli(rng, prob):
    return (rng.uniform(size=prob.shape) < prob).astype(float)


def gen_covariates(group: int, p: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw covariates for one group; see the design constants above."""
    if group == 1 and p == 2:
        z1 = rng.standard_normal(n)
        z2 = _bernoulli(rng, 0.5 + 0.1 * np.sign(z1))
        return np.column_stack((z1, z2))
    if group == 2 and p == 2:
        z1 = rng.standard_normal(n) * _var_to_sd(1.2)
        z2 = _bernoulli(rng, 0.7 - 0.05 * np.sign(z1))
        return np.column_stack((z1, z2))
    if group == 1 and p == 4:
        cov = np.array([[1.0, 0.2], [0.2, 1.0]])
        z12 = rng.multivariate_normal(np.zeros(2), cov, size=n)
        z3 = _bernoulli(rng, np.full(n, 0.4))
        z4 = _bernoulli(rng, np.full(n, 0.6))
        return np.column_stack((z12, z3, z4))
    if group == 2 and p == 4:
        cov = np.array([[1.1, 0.3], [0.3, 1.1]])
        z12 = rng.multivariate_normal(np.zeros(2), cov, size=n)
        prob = 0.5 + 0.1 * np.sign(z12[:, 0])
        z3 = _bernoulli(rng, prob)
        z4 = _bernoulli(rng, prob)
        return np.column_stack((z12, z3, z4))
    raise ValueError(f"no covariate design for group {group}, p={p}")


def gen_event_times(gamma0, gamma, shape, Z, rng: np.random.Generator) -> np.ndarray:
    """Inverse-transform Weibull draws with scale exp(gamma0 + gamma'Z)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    scale = np.exp(gamma0 + Z @ np.asarray(gamma, dtype=float))
    u = rng.uniform(size=scale.shape)
    return scale * (-np.log(u)) ** (1.0 / shape)


def gen_censoring(bound: float, n: int, rng: np.random.Generator) -> np.ndarray:
    if not bound > 0:
        raise ValueError("censoring bound must be positive")
    return rng.uniform(0.0, bound, size=n)


def simulate_dataset(scenario: Scenario, rng: np.random.Generator) -> TwoSampleDataset:
    Z1 = gen_covariates(1, scenario.p, scenario.n1, rng)
    Z2 = gen_covariates(2, scenario.p, scenario.n2, rng)
    T1 = gen_event_times(scenario.gamma10, scenario.gamma1, scenario.k1, Z1, rng)
    T2 = gen_event_times(scenario.gamma20, scenario.gamma2, scenario.k2, Z2, rng)
    if scenario.censored:
        C1 = gen_censoring(scenario.censor_bounds[0], scenario.n1, rng)
        C2 = gen_censoring(scenario.censor_bounds[1], scenario.n2, rng)
        X1, d1 = np.minimum(T1, C1), (T1 <= C1).astype(float)
        X2, d2 = np.minimum(T2, C2), (T2 <= C2).astype(float)
    else:
        X1, d1 = T1, np.ones(scenario.n1)
        X2, d2 = T2, np.ones(scenario.n2)
    return TwoSampleDataset(X1, d1, Z1, X2, d2, Z2, tau=scenario.tau)


def censoring_rate(scenario: Scenario, group: int, n: int, seed: int = 0) -> float:
    """Empirical share of censored subjects in one group at sample size n."""
    rng = np.random.default_rng(seed)
    p = scenario.p
    if group == 1:
        Z = gen_covariates(1, p, n, rng)
        T = gen_event_times(scenario.gamma10, scenario.gamma1, scenario.k1, Z, rng)
        C = gen_censoring(scenario.censor_bounds[0], n, rng)
    else:
        Z = gen_covariates(2, p, n, rng)
        T = gen_event_times(scenario.gamma20, scenario.gamma2, scenario.k2, Z, rng)
        C = gen_censoring(scenario.censor_bounds[1], n, rng)
    return float(np.mean(T > C))


def true_theta_weibull_equal_shapes(
    gamma10, gamma1, z1, gamma20, gamma2, z2, k, tau=np.inf
) -> float:
    """Closed-form truncated relative effect when both shapes equal k.

    With lam_j = exp(gamma_j0 + gamma_j' z_j):
        theta(tau) = (1 - S1(tau) S2(tau)) * lam1^k / (lam1^k + lam2^k),
    approaching a logistic model in k*(eta1 - eta2) as tau -> inf.
    """
    if not k > 0:
        raise ValueError("shape parameter must be positive")
    eta1 = gamma10 + float(np.dot(np.atleast_1d(gamma1), np.atleast_1d(z1)))
    eta2 = gamma20 + float(np.dot(np.atleast_1d(gamma2), np.atleast_1d(z2)))
    logistic = 1.0 / (1.0 + np.exp(-k * (eta1 - eta2)))
    if np.isinf(tau):
        return float(logistic)
    lam1, lam2 = np.exp(eta1), np.exp(eta2)
    joint_surv = np.exp(-(tau**k) * (lam1**-k + lam2**-k))
    return float((1.0 - joint_surv) * logistic)


def true_theta_weibull_numeric(lam1, k1, lam2, k2, tau=np.inf) -> float:
    """Quadrature of -int S1 dS2; independent of the closed form above."""

    def integrand(u):
        s1 = np.exp(-((u / lam1) ** k1))
        f2 = k2 * u ** (k2 - 1) / lam2**k2 * np.exp(-((u / lam2) ** k2))
        return s1 * f2

    upper = min(tau, max(lam1, lam2) * 60.0)
    val, _ = quad(integrand, 0.0, upper, limit=400)
    return float(val)


def warp_speed_harness(
    scenario: Scenario, M: int, seed: int = 0, alpha: float = 0.05
) -> WarpSpeedResult:
    """Warp-speed Monte Carlo: one bootstrap replicate per simulated dataset."""
    if M < 100:
        raise ValueError("need at least 100 Monte Carlo runs for stable rates")
    return warp_speed(
        lambda rng: simulate_dataset(scenario, rng),
        M=M, seed=seed, spec=FitSpec(),
        coefficients=scenario.coefficient_indices, alpha=alpha,
    )


RESULT_FIELDS = [
    "scenario", "setting", "n1", "n2", "censored", "hypothesis",
    "rate_emp", "rate_iqr", "rate_mad", "rate_quantile",
]


def run_scenario(scenario: Scenario, M: int, seed: int = 0, alpha: float = 0.05):
    """Rejection-rate rows for the two first-covariate hypotheses."""
    result = warp_speed_harness(scenario, M=M, seed=seed, alpha=alpha)
    rows = []
    for label, idx in zip(("1", "2"), scenario.coefficient_indices):
        truth = SCENARIO_HYPOTHESES[scenario.scenario_id][int(label) - 1]
        rows.append({
            "scenario": scenario.scenario_id,
            "setting": scenario.setting,
            "n1": scenario.n1,
            "n2": scenario.n2,
            "censored": "yes" if scenario.censored else "no",
            "hypothesis": f"{truth}({label})",
            "rate_emp": result.rejection_rates["emp"][idx],
            "rate_iqr": result.rejection_rates["iqr"][idx],
            "rate_mad": result.rejection_rates["mad"][idx],
            "rate_quantile": result.rejection_rates["quantile"][idx],
        })
    return rows, result


def write_result_rows(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
