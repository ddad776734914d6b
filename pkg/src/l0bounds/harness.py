"""Monte Carlo harness: coverage experiments and assumption checks.

Three kinds of simulation live here:

* ``run_coverage`` -- generate (X, beta, y) replicates, compute the theorem
  constants for each realized design, fit, and test whether the error lands
  inside the guaranteed radius at the advertised rate (Wilson lower
  confidence bound against 1 - 2q);
* ``verify_tail`` -- empirical check of the sub-gaussian projection tail
  assumption for every noise model;
* ``verify_control_event`` -- empirical frequency of the moment control
  event behind the series bounds (all orders k and index tuples at once).

Reproducibility: every replicate draws from
``SeedSequence((seed, replicate))`` so runs are bit-for-bit repeatable and
replicates are independent streams.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .analytic import AnalyticFn, logistic_flip
from .bounds import BoundsReport, glm_report, ub_report
from .design import DesignMatrix, capacity, load_matrix_csv
from .domains import DomainSpec, Interval, in_domain
from .estimator import FitProblem, fit
from .expfam import ExpFamily, bernoulli, gaussian

__all__ = [
    "NoiseModel",
    "gaussian_iid",
    "gaussian_correlated",
    "bounded_iid",
    "bernoulli_residual",
    "flip_channel",
    "power_iteration",
    "wilson_interval",
    "ExperimentConfig",
    "CoverageResult",
    "generate_instance",
    "run_coverage",
    "verify_tail",
    "verify_control_event",
    "multinomial_identity_gap",
]

Z95 = 1.959963984540054  # two-sided 95% normal quantile


# ----------------------------------------------------------------------------
# noise models
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """Tagged residual distribution with its sub-gaussian scale ``sigma``.

    Channel models (bernoulli_residual, flip_channel) generate the response
    themselves; their residuals are bounded by 1, so Hoeffding gives the
    projection tail with sigma = 1.
    """

    tag: str
    sigma: float
    params: dict = field(default_factory=dict)


def gaussian_iid(sigma: float) -> NoiseModel:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return NoiseModel("gaussian_iid", float(sigma))


def gaussian_correlated(sigma: float, rho: float = 0.5) -> NoiseModel:
    """AR(1)-correlated gaussian noise, covariance normalized to spectral
    radius 1 (so the projection tail holds with the same sigma)."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    return NoiseModel("gaussian_correlated", float(sigma), {"rho": float(rho)})


def bounded_iid(sigma: float) -> NoiseModel:
    """iid uniform on [-sigma, sigma]; bounded, hence sigma-sub-gaussian."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return NoiseModel("bounded_iid", float(sigma))


def bernoulli_residual() -> NoiseModel:
    return NoiseModel("bernoulli_residual", 1.0)


def flip_channel(p01: float, p11: float) -> NoiseModel:
    for name, v in (("p01", p01), ("p11", p11)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    if not p11 > p01:
        raise ValueError("flip channel needs p11 > p01")
    return NoiseModel("flip_channel", 1.0, {"p01": float(p01), "p11": float(p11)})


def power_iteration(A, tol: float = 1e-8, max_iter: int = 10_000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix, deterministic start."""
    A = np.asarray(A, dtype=float)
    v = np.ones(A.shape[0]) / math.sqrt(A.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v_new = w / nw
        lam_new = float(v_new @ (A @ v_new))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        v, lam = v_new, lam_new
    return lam


def _corr_chol(n: int, rho: float):
    """Cholesky factor of the AR(1) covariance normalized to spectral radius 1."""
    idx = np.arange(n)
    S = rho ** np.abs(idx[:, None] - idx[None, :])
    lam = power_iteration(S)
    S = S / lam
    return np.linalg.cholesky(S), S


_CHOL_CACHE: dict = {}


def draw_noise(noise: NoiseModel, rng: np.random.Generator, n: int, t=None):
    """Draw one residual vector (channel models need the row images t)."""
    if noise.tag == "gaussian_iid":
        return rng.normal(0.0, noise.sigma, n)
    if noise.tag == "gaussian_correlated":
        key = (n, noise.params["rho"])
        if key not in _CHOL_CACHE:
            _CHOL_CACHE[key] = _corr_chol(n, noise.params["rho"])
        L, _ = _CHOL_CACHE[key]
        return noise.sigma * (L @ rng.normal(0.0, 1.0, n))
    if noise.tag == "bounded_iid":
        return rng.uniform(-noise.sigma, noise.sigma, n)
    if noise.tag == "bernoulli_residual":
        if t is None:
            raise ValueError("bernoulli residuals need row images t")
        p = expit(np.asarray(t, float))
        return rng.binomial(1, p).astype(float) - p
    if noise.tag == "flip_channel":
        if t is None:
            raise ValueError("flip-channel residuals need row images t")
        p01, p11 = noise.params["p01"], noise.params["p11"]
        s = expit(np.asarray(t, float))
        latent = rng.binomial(1, s)
        z = np.where(
            latent == 1, rng.binomial(1, p11, latent.size), rng.binomial(1, p01, latent.size)
        ).astype(float)
        mean = p01 + (p11 - p01) * s
        return z - mean
    raise ValueError(f"unknown noise tag {noise.tag!r}")


def wilson_interval(k: int, n: int, z: float = Z95):
    """Wilson 95% score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    ph = k / n
    denom = 1.0 + z**2 / n
    center = (ph + z**2 / (2 * n)) / denom
    half = z * math.sqrt(ph * (1 - ph) / n + z**2 / (4 * n**2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


# ----------------------------------------------------------------------------
# coverage experiments
# ----------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Specification of one coverage experiment.

    model = "glm" fits a penalized MLE (family per ``family`` tag) with the
    closed-form constants; model = "flip" observes a flipped-channel binary
    response and fits least squares with the strip-envelope series
    constants.  c_r = "theorem" takes the penalty from the per-replicate
    report; a float uses that value directly.
    """

    n: int
    p: int
    spt_size: int
    replicates: int
    q: float = 0.1
    nu: float = 0.5
    model: str = "glm"
    family: str = "bernoulli"
    sigma2: float = 1.0
    p01: float = 0.1
    p11: float = 0.9
    design: str = "pm1_iid"
    csv_path: str | None = None
    interval_halfwidth: float = 3.0
    theta: float = 0.75
    rho1: float = math.pi / 2.0
    c_r: object = "theorem"
    h_max: int | None = None
    K: int = 60
    seed: int = 20260819

    def __post_init__(self):
        if not 0.0 < self.q <= 0.25:
            raise ValueError("q must lie in (0, 0.25]")
        for name in ("n", "p", "spt_size", "replicates"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.spt_size > self.p:
            raise ValueError("spt_size cannot exceed p")
        if self.model not in ("glm", "flip"):
            raise ValueError("model must be 'glm' or 'flip'")
        if self.design not in ("pm1_iid", "binary_iid", "gaussian_iid", "csv"):
            raise ValueError("unknown design tag")
        if self.design == "csv" and not self.csv_path:
            raise ValueError("csv design needs csv_path")
        if not self.interval_halfwidth > 0:
            raise ValueError("interval_halfwidth must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown experiment keys: {sorted(extra)}")
        return cls(**d)

    def family_obj(self) -> ExpFamily:
        if self.family == "bernoulli":
            return bernoulli()
        if self.family == "gaussian":
            return gaussian(self.sigma2)
        raise ValueError("family must be 'bernoulli' or 'gaussian'")

    def link_obj(self) -> AnalyticFn:
        return logistic_flip(self.p01, self.p11)

    def noise_obj(self) -> NoiseModel:
        if self.model == "flip":
            return flip_channel(self.p01, self.p11)
        if self.family == "bernoulli":
            return bernoulli_residual()
        return gaussian_iid(math.sqrt(self.sigma2))


@dataclass(frozen=True)
class Instance:
    X: DesignMatrix
    beta: np.ndarray
    y: np.ndarray
    t: np.ndarray


def _replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(replicate))))


def _draw_design(cfg: ExperimentConfig, rng: np.random.Generator) -> DesignMatrix:
    if cfg.design == "pm1_iid":
        return DesignMatrix(rng.choice([-1.0, 1.0], size=(cfg.n, cfg.p)))
    if cfg.design == "binary_iid":
        X = rng.integers(0, 2, size=(cfg.n, cfg.p)).astype(float)
        # a zero column breaks every norm ratio; flip one entry if it happens
        for j in range(cfg.p):
            if not X[:, j].any():
                X[int(rng.integers(cfg.n)), j] = 1.0
        return DesignMatrix(X)
    if cfg.design == "gaussian_iid":
        return DesignMatrix(rng.normal(0.0, 1.0, size=(cfg.n, cfg.p)))
    return DesignMatrix(load_matrix_csv(cfg.csv_path))


def _fit_domain(cfg: ExperimentConfig, dm: DesignMatrix) -> DomainSpec:
    """Fit domain: interval rows, weighted cap, and a support budget that
    stays inside the theorem domain (half the coherence capacity) whenever
    that still admits the truth; when the capacity precondition fails the
    budget falls back to spt_size and the failure is recorded upstream."""
    r = cfg.interval_halfwidth
    cap = capacity(dm, cfg.nu)
    h_req = cfg.h_max if cfg.h_max is not None else cfg.spt_size
    half_cap = math.floor(cap / 2.0) if math.isfinite(cap) else h_req
    h_dom = max(cfg.spt_size, min(h_req, half_cap))
    return DomainSpec(
        interval=Interval(-r, r),
        max_support=float(h_dom),
        l1inf_cap=r,
    )


def generate_instance(cfg: ExperimentConfig, replicate: int) -> Instance:
    """One (X, beta, y) draw; beta is rescaled into the fit domain and its
    membership certified.  Raises after 100 failed rescaling attempts."""
    rng = _replicate_rng(cfg.seed, replicate)
    dm = _draw_design(cfg, rng)
    D = _fit_domain(cfg, dm)
    beta = None
    for _ in range(100):
        b = np.zeros(cfg.p)
        spt = rng.choice(cfg.p, size=cfg.spt_size, replace=False)
        b[spt] = rng.uniform(0.5, 1.5, cfg.spt_size) * rng.choice([-1.0, 1.0], cfg.spt_size)
        scale = 1.0
        rows = dm.X @ b
        mx = float(np.max(np.abs(rows)))
        if mx > 0:
            scale = min(scale, cfg.interval_halfwidth / mx)
        wn = float(np.abs(b) @ dm.column_norms(math.inf))
        if wn > 0:
            scale = min(scale, D.l1inf_cap / wn)
        b = b * (scale * (1.0 - 1e-12))
        if in_domain(b, dm, D) and np.count_nonzero(b) == cfg.spt_size:
            beta = b
            break
    if beta is None:
        raise ValueError("could not place beta inside the domain after 100 attempts")
    t = dm.X @ beta
    if cfg.model == "flip":
        noise = flip_channel(cfg.p01, cfg.p11)
        eps = draw_noise(noise, rng, cfg.n, t=t)
        f = cfg.link_obj()
        y = f(t) + eps  # exactly the observed 0/1 channel output
    else:
        fam = cfg.family_obj()
        if fam.tag == "bernoulli":
            eps = draw_noise(bernoulli_residual(), rng, cfg.n, t=t)
            y = expit(t) + eps
        else:
            y = fam.mean(t) + draw_noise(gaussian_iid(math.sqrt(cfg.sigma2)), rng, cfg.n)
    return Instance(X=dm, beta=beta, y=y, t=t)


def replicate_report(cfg: ExperimentConfig, dm: DesignMatrix) -> BoundsReport:
    """Theorem constants for one realized design."""
    I = Interval(-cfg.interval_halfwidth, cfg.interval_halfwidth)
    if cfg.model == "glm":
        fam = cfg.family_obj()
        sigma = 1.0 if fam.tag == "bernoulli" else math.sqrt(cfg.sigma2)
        return glm_report(dm, fam, I, sigma, cfg.q, cfg.nu)
    f = cfg.link_obj()
    cap = capacity(dm, cfg.nu)
    h = max(1.0, cap / 2.0) if math.isfinite(cap) else 1.0
    return ub_report(
        dm, f, I, 1.0, cfg.q, cfg.nu,
        rho1=cfg.rho1, theta=cfg.theta, h=h,
        delta_D=cfg.interval_halfwidth, mode="strip", K=cfg.K,
    )


@dataclass
class CoverageResult:
    """Per-replicate errors/radii/hits plus the Wilson verdict."""

    config: ExperimentConfig
    rows: list
    coverage: float
    wilson_lo: float
    wilson_hi: float
    target: float
    passed: bool
    n_fit_errors: int
    budget_ok_frac: float

    def to_json(self) -> str:
        cfg = {k: getattr(self.config, k) for k in self.config.__dataclass_fields__}
        cfg["c_r"] = str(cfg["c_r"])
        return json.dumps(
            {
                "config": cfg,
                "coverage": self.coverage,
                "wilson_lo": self.wilson_lo,
                "wilson_hi": self.wilson_hi,
                "target": self.target,
                "passed": self.passed,
                "n_fit_errors": self.n_fit_errors,
                "budget_ok_frac": self.budget_ok_frac,
                "replicates": len(self.rows),
            },
            indent=2,
        )

    def to_csv(self, path):
        cols = [
            "replicate", "error", "radius", "hit", "spt_hat", "c_r", "kappa_r",
            "mu", "budget_ok", "fit_error",
        ]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            for row in self.rows:
                w.writerow({c: row[c] for c in cols})


def run_coverage(cfg: ExperimentConfig) -> CoverageResult:
    """Run the coverage experiment; fit failures count as misses, not crashes."""
    rows = []
    hits = 0
    errors = 0
    budget_ok = 0
    for rep in range(cfg.replicates):
        inst = generate_instance(cfg, rep)
        report = replicate_report(cfg, inst.X)
        D = _fit_domain(cfg, inst.X)
        cap = capacity(inst.X, cfg.nu)
        b_ok = cfg.spt_size <= cap / 2.0
        budget_ok += b_ok
        c_r = report.c_r if cfg.c_r == "theorem" else float(cfg.c_r)
        radius = report.error_radius(cfg.spt_size, cfg.n)
        row = {
            "replicate": rep,
            "radius": radius,
            "c_r": c_r,
            "kappa_r": report.kappa_r,
            "mu": report.inputs["mu"],
            "budget_ok": int(b_ok),
            "fit_error": "",
            "error": math.nan,
            "hit": 0,
            "spt_hat": -1,
        }
        try:
            if cfg.model == "glm":
                prob = FitProblem(
                    y=inst.y, X=inst.X, domain=D, c_r=c_r,
                    h_max=int(D.max_support), loss="mle", family=cfg.family_obj(),
                )
            else:
                prob = FitProblem(
                    y=inst.y, X=inst.X, domain=D, c_r=c_r,
                    h_max=int(D.max_support), loss="lse", link=cfg.link_obj(),
                )
            res = fit(prob)
            err = float(np.linalg.norm(res.beta_hat.values - inst.beta))
            row["error"] = err
            row["hit"] = int(err <= radius)
            row["spt_hat"] = len(res.support)
            hits += row["hit"]
        except (ValueError, AssertionError) as exc:  # count as a miss
            errors += 1
            row["fit_error"] = str(exc)
        rows.append(row)
    lo, hi = wilson_interval(hits, cfg.replicates)
    target = 1.0 - 2.0 * cfg.q
    return CoverageResult(
        config=cfg,
        rows=rows,
        coverage=hits / cfg.replicates,
        wilson_lo=lo,
        wilson_hi=hi,
        target=target,
        passed=lo >= target,
        n_fit_errors=errors,
        budget_ok_frac=budget_ok / cfg.replicates,
    )


# ----------------------------------------------------------------------------
# assumption checks
# ----------------------------------------------------------------------------


def verify_tail(
    noise: NoiseModel,
    trials: int = 100_000,
    n: int = 20,
    n_dirs: int = 8,
    seed: int = 2026,
) -> dict:
    """Empirical projection-tail check: for unit directions a and
    t in {1, 2, 3} sigma, the frequency of (sum_i a_i eps_i)^2 > t^2 must
    not exceed 2 exp(-t^2 / 2 sigma^2) by more than 3 binomial SEs."""
    if trials < 10_000:
        raise ValueError("tail verification needs at least 1e4 trials")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x7A11)))
    A = rng.normal(0.0, 1.0, size=(n, n_dirs))
    A /= np.linalg.norm(A, axis=0, keepdims=True)
    t_lat = rng.uniform(-2.0, 2.0, n)  # row images for channel noises
    counts = np.zeros((3, n_dirs), dtype=int)
    block = 20_000
    done = 0
    while done < trials:
        b = min(block, trials - done)
        E = np.empty((b, n))
        for i in range(b):
            E[i] = draw_noise(noise, rng, n, t=t_lat)
        S = E @ A
        for m in (1, 2, 3):
            counts[m - 1] += np.sum(S**2 > (m * noise.sigma) ** 2, axis=0)
        done += b
    rows = []
    all_ok = True
    for m in (1, 2, 3):
        bound = 2.0 * math.exp(-(m**2) / 2.0)
        for j in range(n_dirs):
            freq = counts[m - 1, j] / trials
            se = math.sqrt(max(freq * (1 - freq), 1.0 / trials) / trials)
            ok = freq <= min(1.0, bound) + 3.0 * se
            all_ok &= ok
            rows.append(
                {"t_over_sigma": m, "direction": j, "freq": freq, "bound": bound,
                 "se": se, "ok": bool(ok)}
            )
    return {"noise": noise.tag, "sigma": noise.sigma, "trials": trials,
            "rows": rows, "all_ok": bool(all_ok)}


def verify_control_event(
    X,
    f: AnalyticFn,
    centers,
    noise: NoiseModel,
    q: float,
    K_check: int = 3,
    trials: int = 10_000,
    seed: int = 2026,
) -> dict:
    """Empirical frequency of the joint moment-control event.

    For each center u, order k <= K_check and index tuple alpha in
    {1..p}^k, the event requires
    |sum_i eps_i a_{ik}(u) X_{i alpha}| <= sigma sqrt(2 ln(p^k / q_k))
    ||(a_{ik} X_{i alpha})_i||_2 with q_k = (q/(1+q))^k split across
    centers.  The frequency of all finite-order events holding must reach
    1 - 2q - 3 SE (the infinite tail of orders is not simulated; its budget
    is part of the same geometric split).
    """
    dm = X if isinstance(X, DesignMatrix) else DesignMatrix(X)
    if not 0.0 < q < 0.5:
        raise ValueError("q must lie in (0, 1/2)")
    if K_check < 1 or K_check > 6:
        raise ValueError("K_check must lie in 1..6")
    centers = [np.asarray(c, dtype=float).ravel() for c in centers]
    if not centers:
        raise ValueError("need at least one center")
    n_rows = len(centers) * sum(dm.p**k for k in range(1, K_check + 1))
    if n_rows > 100_000:
        raise ValueError("tuple budget exceeded (more than 1e5 rows)")
    V = []
    thr = []
    for u in centers:
        t = dm.X @ u
        for k in range(1, K_check + 1):
            a_k = np.array([f.coeff_k(k, ti) for ti in t])
            qk = (q / (1.0 + q)) ** k / len(centers)
            lam = math.sqrt(2.0 * math.log(dm.p**k / qk))
            for alpha in itertools.product(range(dm.p), repeat=k):
                prod = np.ones(dm.n)
                for j in alpha:
                    prod = prod * dm.X[:, j]
                v = a_k * prod
                nv = float(np.linalg.norm(v))
                if nv == 0.0:
                    continue  # event holds trivially
                V.append(v)
                thr.append(noise.sigma * lam * nv)
    V = np.array(V)
    thr = np.array(thr)
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xC0)))
    t0 = dm.X @ centers[0]
    good = 0
    block = 2_000
    done = 0
    while done < trials:
        b = min(block, trials - done)
        E = np.empty((b, dm.n))
        for i in range(b):
            E[i] = draw_noise(noise, rng, dm.n, t=t0)
        Z = np.abs(E @ V.T) <= thr[None, :]
        good += int(np.sum(np.all(Z, axis=1)))
        done += b
    freq = good / trials
    se = math.sqrt(max(freq * (1 - freq), 1.0 / trials) / trials)
    target = 1.0 - 2.0 * q
    return {
        "freq": freq,
        "target": target,
        "se": se,
        "ok": bool(freq >= target - 3.0 * se),
        "rows": int(V.shape[0]),
        "trials": trials,
    }


def multinomial_identity_gap(x, k: int) -> float:
    """Max relative gap in the weight identity behind the series bounds:

    for every j, sum over alpha in {1..p}^k of
    n_j(alpha) x_j^(n_j(alpha)-1) prod_{s != j} x_s^(n_s(alpha))
    equals k (sum_s x_s)^(k-1).
    """
    x = np.asarray(x, dtype=float).ravel()
    p = x.size
    if k < 1 or p**k > 2_000_000:
        raise ValueError("k out of range for exact enumeration")
    rhs = k * float(np.sum(x)) ** (k - 1)
    worst = 0.0
    for j in range(p):
        lhs = 0.0
        for alpha in itertools.product(range(p), repeat=k):
            nj = alpha.count(j)
            if nj == 0:
                continue
            term = nj * x[j] ** (nj - 1)
            for s in set(alpha):
                if s != j:
                    term *= x[s] ** alpha.count(s)
            lhs += term
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return worst
