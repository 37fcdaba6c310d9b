"""Reconciliation of count forecasts by conditioning on upper base forecasts.

The joint over the hierarchy starts as the probabilistic bottom-up
distribution (independent bottom pmfs, uppers determined by summation).
Each upper base forecast is then folded in as uncertain (virtual) evidence:
atom b is reweighted by the likelihood p_hat(u_i = A[i] @ b) and the joint
renormalized. The posterior is available exactly (enumeration over a
truncated product support) or by Metropolis-Hastings sampling over bottom
count vectors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .distributions import CountPmf, Tabulated, DEFAULT_EPSILON
from .errors import (
    ConvergenceWarning,
    DimensionError,
    IncompatibleEvidence,
    SamplerStuck,
    SupportTooLarge,
    UndefinedCorrelation,
)
from .hierarchy import Hierarchy

#: largest number of enumerated cells before exact reconciliation refuses
DEFAULT_CELL_CAP = 10**7

#: per-bottom tail mass ignored by the MCMC lookup tables
_MCMC_TAIL = 1e-15


@dataclass
class BaseForecastSet:
    """Per-node base forecasts: bottom pmfs plus optional upper evidences.

    Bottom forecasts are treated as independent. A None entry in `upper`
    means that evidence is unavailable and its update is skipped.
    """

    bottom: list[CountPmf]
    upper: list[CountPmf | None]

    def validate(self, h: Hierarchy):
        if len(self.bottom) != h.m:
            raise DimensionError(f"expected {h.m} bottom forecasts, got {len(self.bottom)}")
        if any(pmf is None for pmf in self.bottom):
            raise DimensionError("bottom forecasts must all be present")
        if len(self.upper) != h.n_upper:
            raise DimensionError(f"expected {h.n_upper} upper slots, got {len(self.upper)}")


@dataclass
class ExactJoint:
    """Tabulated coherent joint: bottom atoms with matching probabilities."""

    bottom_support: np.ndarray  # (n_atoms, m) non-negative ints
    probabilities: np.ndarray  # (n_atoms,) summing to 1

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n bottom vectors from the tabulated joint."""
        p = self.probabilities / self.probabilities.sum()
        idx = rng.choice(len(p), size=n, p=p)
        return self.bottom_support[idx]

    def to_dict(self, labels=None) -> dict:
        d = {
            "atoms": self.bottom_support.tolist(),
            "probs": self.probabilities.tolist(),
        }
        if labels is not None:
            d["labels"] = list(labels)
        return d


@dataclass
class SamplerDiagnostics:
    acceptance_rates: np.ndarray  # per chain
    rhat: np.ndarray  # split R-hat per bottom coordinate
    n_chains: int
    n_kept: int
    burn_in: int
    thin: int


@dataclass
class SampledJoint:
    """Coherent joint held as sampled bottom vectors (chains concatenated)."""

    draws: np.ndarray  # (n_draws, m) non-negative ints
    seed: int | None = None
    diagnostics: SamplerDiagnostics | None = None


ReconciledJoint = ExactJoint | SampledJoint


def bottom_up_exact(
    h: Hierarchy,
    base: BaseForecastSet,
    epsilon: float = DEFAULT_EPSILON,
    cell_cap: int = DEFAULT_CELL_CAP,
) -> ExactJoint:
    """Tabulate the probabilistic bottom-up joint over a truncated support.

    Each bottom pmf is truncated at its 1-epsilon quantile; the product
    measure over the resulting grid is renormalized. Upper values need no
    storage: they are implied by A @ b, which makes the joint coherent by
    construction.

    Raises:
        SupportTooLarge: the grid would exceed cell_cap cells.
    """
    base.validate(h)
    sizes = [pmf.quantile_truncate(epsilon) + 1 for pmf in base.bottom]
    n_cells = float(np.prod([float(s) for s in sizes]))
    if n_cells > cell_cap:
        raise SupportTooLarge(
            f"product support has {n_cells:.3g} cells (cap {cell_cap}); "
            "use reconcile_mcmc instead"
        )
    marginals = [pmf.pmf(np.arange(s)) for pmf, s in zip(base.bottom, sizes)]
    probs = reduce(np.multiply.outer, marginals).reshape(-1)
    grids = np.meshgrid(*[np.arange(s) for s in sizes], indexing="ij")
    support = np.stack([g.reshape(-1) for g in grids], axis=1).astype(np.int64)
    return ExactJoint(support, probs / probs.sum())


def condition_on_upper(
    joint: ExactJoint, h: Hierarchy, upper_index: int, evidence: CountPmf
) -> ExactJoint:
    """Update an exact joint with the virtual evidence for one upper node.

    Atom b is reweighted by the evidence mass at its aggregate value
    A[upper_index] @ b, then the joint is renormalized. Atoms with zero
    probability keep it: conditioning never revives them.

    Raises:
        IncompatibleEvidence: the evidence puts zero mass on every aggregate
            value reachable from the current support.
    """
    if not 0 <= upper_index < h.n_upper:
        raise DimensionError(f"upper index {upper_index} out of range for {h.n_upper} uppers")
    u_values = joint.bottom_support @ h.a_matrix[upper_index]
    weights = joint.probabilities * evidence.pmf(u_values)
    total = weights.sum()
    if total <= 0:
        raise IncompatibleEvidence(
            f"evidence for upper node {upper_index} has no mass on reachable sums"
        )
    return ExactJoint(joint.bottom_support, weights / total)


def reconcile_exact(
    h: Hierarchy,
    base: BaseForecastSet,
    epsilon: float = DEFAULT_EPSILON,
    cell_cap: int = DEFAULT_CELL_CAP,
) -> ExactJoint:
    """Bottom-up joint conditioned sequentially on every present evidence.

    Updates are applied in A-row order; the order does not matter because
    virtual-evidence updates commute. Absent upper forecasts are skipped.
    """
    joint = bottom_up_exact(h, base, epsilon=epsilon, cell_cap=cell_cap)
    for i, evidence in enumerate(base.upper):
        if evidence is not None:
            joint = condition_on_upper(joint, h, i, evidence)
    return joint


def _mcmc_tables(h: Hierarchy, base: BaseForecastSet):
    """Log-pmf lookup tables for the unnormalized target.

    Bottom tables are capped at the 1-1e-15 quantile of each pmf; states
    beyond a cap are treated as zero-probability (the walk cannot jump the
    cap, so the bias is below the table's tail mass). Absent evidences
    contribute a zero row, i.e. a constant factor.
    """
    caps = np.array([pmf.quantile_truncate(_MCMC_TAIL) for pmf in base.bottom], dtype=np.int64)
    bottom_tables = np.full((h.m, int(caps.max()) + 1), -np.inf)
    for j, pmf in enumerate(base.bottom):
        bottom_tables[j, : caps[j] + 1] = pmf.log_pmf_table(int(caps[j]) + 1)
    upper_sizes = h.a_matrix @ caps + 1
    upper_tables = np.zeros((h.n_upper, int(upper_sizes.max())))
    for i, pmf in enumerate(base.upper):
        if pmf is not None:
            upper_tables[i, : upper_sizes[i]] = pmf.log_pmf_table(int(upper_sizes[i]))
    return caps, bottom_tables, upper_tables


def _split_rhat(kept: np.ndarray) -> np.ndarray:
    """Split R-hat per coordinate; kept has shape (chains, draws, m)."""
    n_chains, n_draws, m = kept.shape
    half = n_draws // 2
    if half < 2:
        return np.full(m, np.nan)
    seqs = np.concatenate([kept[:, :half], kept[:, half: 2 * half]], axis=0).astype(float)
    means = seqs.mean(axis=1)  # (2C, m)
    within = seqs.var(axis=1, ddof=1).mean(axis=0)  # (m,)
    between = half * means.var(axis=0, ddof=1)  # (m,)
    rhat = np.empty(m)
    for d in range(m):
        if within[d] == 0:
            rhat[d] = 1.0 if between[d] == 0 else np.inf
        else:
            var_plus = (half - 1) / half * within[d] + between[d] / half
            rhat[d] = float(np.sqrt(var_plus / within[d]))
    return rhat


def reconcile_mcmc(
    h: Hierarchy,
    base: BaseForecastSet,
    n_chains: int = 4,
    n_samples: int = 10_000,
    burn_in: int | None = None,
    seed: int = 0,
    thin: int = 10,
) -> SampledJoint:
    """Sample the reconciled joint with Metropolis-Hastings.

    The unnormalized target over bottom vectors is the product of the bottom
    pmfs and, for each present evidence, its mass at the implied aggregate.
    Proposals perturb one uniformly chosen coordinate by +-1 (symmetric, so
    no Hastings correction); proposals leaving the non-negative orthant have
    zero target mass and are rejected. Chains start at the per-bottom
    medians, run `burn_in` discarded iterations (default: half the sampling
    phase) and then keep every `thin`-th state until `n_samples` draws per
    chain are collected. Each chain owns a generator spawned from `seed`, so
    the merged output is reproducible regardless of execution order.

    Raises:
        SamplerStuck: a chain never reached a state with positive target
            probability.

    Warns:
        ConvergenceWarning: split R-hat above 1.1 on some coordinate
            (non-fatal; also recorded in the diagnostics).
    """
    base.validate(h)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    if burn_in is None:
        burn_in = (n_samples * thin) // 2
    caps, bottom_tables, upper_tables = _mcmc_tables(h, base)
    coord_idx = np.arange(h.m)
    upper_idx = np.arange(h.n_upper)

    def log_target(states: np.ndarray) -> np.ndarray:
        lp = bottom_tables[coord_idx[None, :], states].sum(axis=1)
        u = states @ h.a_matrix.T
        lp = lp + upper_tables[upper_idx[None, :], u].sum(axis=1)
        return lp

    total_iters = burn_in + n_samples * thin
    start = np.array([min(pmf.median(), cap) for pmf, cap in zip(base.bottom, caps)],
                     dtype=np.int64)
    state = np.tile(start, (n_chains, 1))
    lp = log_target(state)
    reached = np.isfinite(lp)

    # per-chain generators, pre-drawn in blocks and consumed in lock-step
    children = np.random.SeedSequence(seed).spawn(n_chains)
    coords = np.empty((n_chains, total_iters), dtype=np.int64)
    steps = np.empty((n_chains, total_iters), dtype=np.int64)
    log_u = np.empty((n_chains, total_iters))
    for c, child in enumerate(children):
        rng = np.random.default_rng(child)
        coords[c] = rng.integers(0, h.m, size=total_iters)
        steps[c] = rng.integers(0, 2, size=total_iters) * 2 - 1
        log_u[c] = np.log(rng.random(total_iters))

    kept = np.empty((n_chains, n_samples, h.m), dtype=np.int64)
    accepted = np.zeros(n_chains, dtype=np.int64)
    chain_rows = np.arange(n_chains)
    kept_count = 0
    for it in range(total_iters):
        j = coords[:, it]
        old = state[chain_rows, j]
        new = old + steps[:, it]
        inside = (new >= 0) & (new <= caps[j])
        prop = state.copy()
        prop[chain_rows, j] = np.where(inside, new, old)
        lp_new = np.where(inside, log_target(prop), -np.inf)
        with np.errstate(invalid="ignore"):  # -inf minus -inf stays a rejection
            accept = log_u[:, it] < lp_new - lp
        state[accept] = prop[accept]
        lp[accept] = lp_new[accept]
        accepted += accept
        reached |= np.isfinite(lp)
        if it >= burn_in and (it - burn_in) % thin == thin - 1:
            kept[:, kept_count] = state
            kept_count += 1

    if not reached.all():
        stuck = np.where(~reached)[0].tolist()
        raise SamplerStuck(f"chains {stuck} never reached positive target probability")

    rhat = _split_rhat(kept)
    assessed = rhat[~np.isnan(rhat)]
    if assessed.size and (assessed > 1.1).any():
        warnings.warn(
            f"split R-hat above 1.1 on some bottom coordinate: {np.round(rhat, 3)}",
            ConvergenceWarning,
            stacklevel=2,
        )
    diag = SamplerDiagnostics(
        acceptance_rates=accepted / total_iters,
        rhat=rhat,
        n_chains=n_chains,
        n_kept=n_chains * n_samples,
        burn_in=burn_in,
        thin=thin,
    )
    return SampledJoint(kept.reshape(-1, h.m), seed=seed, diagnostics=diag)


def _node_values(joint: ReconciledJoint, h: Hierarchy, node_index: int):
    """Values of one node across atoms/draws, with matching weights."""
    if not 0 <= node_index < h.n:
        raise DimensionError(f"node index {node_index} out of range for n={h.n}")
    if isinstance(joint, ExactJoint):
        bottoms, weights = joint.bottom_support, joint.probabilities
    else:
        bottoms = joint.draws
        weights = np.full(len(bottoms), 1.0 / len(bottoms))
    values = bottoms @ h.s_matrix[node_index]
    return values, weights


@dataclass
class MarginalSummary:
    """Per-node view of a reconciled joint."""

    label: str
    mean: float
    variance: float
    median: int
    interval: tuple[int, int]
    pmf: Tabulated

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "median": self.median,
            "interval": list(self.interval),
            "marginal": self.pmf.to_dict(),
        }


def central_interval(pmf: Tabulated, alpha: float) -> tuple[int, int]:
    """Equal-tailed interval on counts with coverage >= 1 - alpha.

    Lower endpoint: largest l whose strict lower tail P(X < l) is <= alpha/2;
    upper endpoint: smallest u with CDF(u) >= 1 - alpha/2.
    """
    cdf = np.cumsum(pmf.probs)
    below = np.concatenate([[0.0], cdf[:-1]])  # P(X < k)
    lo = int(np.max(np.nonzero(below <= alpha / 2 + 1e-12)[0]))
    hi = int(np.searchsorted(cdf, 1 - alpha / 2 - 1e-12, side="left"))
    return lo, min(hi, pmf.support_max)


def summarize(joint: ReconciledJoint, h: Hierarchy, alpha: float = 0.1) -> dict[str, MarginalSummary]:
    """Marginal summaries for every node, keyed by node label.

    Bottom marginals come straight from the joint; upper marginals aggregate
    each atom/draw through the relevant A row. Intervals are equal-tailed
    central intervals at level 1 - alpha.
    """
    out = {}
    for idx, label in enumerate(h.node_labels):
        values, weights = _node_values(joint, h, idx)
        pmf = Tabulated.from_weights(np.bincount(values, weights=weights))
        out[label] = MarginalSummary(
            label=label,
            mean=pmf.mean(),
            variance=pmf.variance(),
            median=pmf.median(),
            interval=central_interval(pmf, alpha),
            pmf=pmf,
        )
    return out


def correlation(joint: ReconciledJoint, h: Hierarchy, node_i: int, node_j: int) -> float:
    """Pearson correlation between two nodes under the reconciled joint."""
    vi, w = _node_values(joint, h, node_i)
    vj, _ = _node_values(joint, h, node_j)
    mi, mj = vi @ w, vj @ w
    var_i = (vi - mi) ** 2 @ w
    var_j = (vj - mj) ** 2 @ w
    if var_i <= 0 or var_j <= 0:
        raise UndefinedCorrelation(
            f"zero marginal variance for node pair ({node_i}, {node_j})"
        )
    cov = (vi - mi) * (vj - mj) @ w
    return float(cov / np.sqrt(var_i * var_j))
