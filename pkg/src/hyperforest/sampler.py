"""Adaptive Metropolis sampling of the pinned t-field measure.

The target density on a pinned weighted graph is

    dmu(t)  propto  exp(-F(grad t) - M(t)) * [det D(t)]^a  prod_j dt_j,

with ``F``, ``M`` and ``D`` as in :mod:`hyperforest.graphs`.  The sampler
is a per-site random-walk Metropolis chain with Gaussian proposals whose
scales adapt toward a target acceptance rate during burn-in (Robbins-Monro
on the log scale) and are frozen afterwards, so the measurement phase
satisfies detailed balance exactly.

The determinant ratio of a single-site move is computed exactly through
the matrix determinant lemma applied to the tilted Laplacian
``Delta(t) = diag(e^t) D(t) diag(e^t)``: moving ``t_v`` perturbs ``Delta``
only on the span of the edges at ``v`` (plus the pinning direction), a
rank ``deg(v)+1`` update.  The inverse of ``Delta`` is carried along via
the Woodbury identity and refreshed from a fresh Cholesky factorisation
once per sweep, so floating-point drift never survives a full pass.

Observables are evaluated on stored sweeps after the fact.  Error bars
come from batch means (32 batches pooled over chains), convergence is
monitored with the split R-hat statistic, and every reduction is ordered
by chain index so a seed pins down each estimate bitwise.
"""

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field, asdict
from fractions import Fraction

import numpy as np
import scipy.integrate
import scipy.linalg

from .graphs import (T_RANGE_LIMIT, NotPositiveDefinite, WeightedGraph,
                     assemble_laplacian, energy_F, energy_M,
                     euclidean_distance, green_bundle, green_matrix,
                     log_density, vertex_at)

__all__ = [
    "NonConvergenceWarning", "ExperimentalWarning", "McmcConfig",
    "ChainStats", "SampleSet", "run_chains", "series_stats",
    "observable_stats", "moment_estimate", "FourierEstimate",
    "fourier_estimate", "laplace_estimate", "laplace_decay_fit",
    "green_expectation", "bundle_estimate", "single_site_expectation",
    "quadrature_expectation", "run_manifest", "stats_to_csv",
]


class NonConvergenceWarning(UserWarning):
    """Split R-hat exceeded its threshold on some observable."""


class ExperimentalWarning(UserWarning):
    """Requested a parameter regime the sampler supports but does not vouch for."""


RHAT_THRESHOLD = 1.05
N_BATCHES = 32


@dataclass
class McmcConfig:
    """Run parameters for :func:`run_chains`.

    Parameters
    ----------
    seed : int
        Master seed; per-chain generators are spawned from it through
        ``numpy.random.SeedSequence(seed).spawn(chains)``.
    chains : int
        Number of independent chains, at least 2 (split R-hat needs them).
    burn_in : int
        Adaptation sweeps discarded before measurement.
    sweeps : int
        Measurement sweeps; one stored sample per sweep.
    proposal_scale : float
        Initial per-site Gaussian proposal width.
    adapt_window : int
        Sweeps per Robbins-Monro adaptation step during burn-in.
    target_acceptance : float
        Per-site acceptance rate the adaptation steers toward.
    workers : int
        Worker processes for chain-level parallelism (1 = sequential;
        estimates do not depend on this).
    """

    seed: int
    chains: int = 2
    burn_in: int = 300
    sweeps: int = 1200
    proposal_scale: float = 0.8
    adapt_window: int = 25
    target_acceptance: float = 0.44
    workers: int = 1

    def __post_init__(self):
        if self.sweeps <= 0:
            raise ValueError("sweeps must be positive")
        if self.chains < 2:
            raise ValueError("need at least two chains for split R-hat")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if not (0.0 < self.target_acceptance < 1.0):
            raise ValueError("target acceptance must lie in (0, 1)")
        if self.proposal_scale <= 0:
            raise ValueError("proposal scale must be positive")
        if self.adapt_window <= 0:
            raise ValueError("adapt window must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class ChainStats:
    """Summary of one scalar observable over all chains.

    ``stderr`` is the batch-means standard error of ``mean`` (32 batches
    pooled over chains), ``ess`` the implied effective sample size, and
    ``rhat`` the split R-hat over chain halves.
    """

    name: str
    mean: float
    stderr: float
    ess: float
    rhat: float
    acceptance: float
    n_samples: int
    chains: int


@dataclass(frozen=True)
class SampleSet:
    """Stored sweeps of every chain plus run bookkeeping."""

    graph: WeightedGraph
    a: float
    config: McmcConfig
    t: np.ndarray                 # (chains, sweeps, n_vertices)
    acceptance: tuple             # per chain, measurement phase
    proposal_scales: np.ndarray   # (chains, n_vertices), frozen values
    range_rejected: int
    pd_rejected: int

    def stacked(self):
        """All samples in chain order, shape (chains*sweeps, n_vertices)."""
        return self.t.reshape(-1, self.t.shape[-1])


# ----------------------------------------------------------------------
# the chain
# ----------------------------------------------------------------------

class _MovePlan:
    """Per-vertex precomputation for single-site determinant updates."""

    def __init__(self, graph):
        adj = graph.neighbors()
        self.nbr = [np.array([k for (k, _) in adj[v]], dtype=np.intp)
                    for v in range(graph.n_vertices)]
        self.J = [np.array([float(J) for (_, J) in adj[v]])
                  for v in range(graph.n_vertices)]
        self.eps = np.array([float(e) for e in graph.eps])
        # rows = [v, neighbors...]; incidence A maps that sub-basis to the
        # update directions: one e_v - e_k per edge at v, plus e_v itself
        # when v is pinned.
        self.rows = []
        self.A = []
        for v in range(graph.n_vertices):
            deg = len(self.nbr[v])
            pinned = self.eps[v] > 0
            moves = deg + (1 if pinned else 0)
            A = np.zeros((moves, deg + 1))
            A[:deg, 0] = 1.0
            A[np.arange(deg), np.arange(deg) + 1] = -1.0
            if pinned:
                A[deg, 0] = 1.0
            self.rows.append(np.concatenate(([v], self.nbr[v])).astype(np.intp))
            self.A.append(A)


def _refresh_inverse(graph, t):
    """Cholesky-based inverse of Delta(t); raises NotPositiveDefinite."""
    delta = assemble_laplacian(graph, t)
    try:
        c, low = scipy.linalg.cho_factor(delta, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Delta(t): {exc}") from None
    return scipy.linalg.cho_solve((c, low), np.eye(graph.n_vertices))


def _run_single_chain(graph, a, config, seed_child):
    rng = np.random.default_rng(seed_child)
    plan = _MovePlan(graph)
    V = graph.n_vertices
    t = np.zeros(V)
    sigma = np.full(V, config.proposal_scale)
    use_det = (a != 0)

    samples = np.empty((config.sweeps, V))
    window_accepts = np.zeros(V)
    window_proposals = np.zeros(V)
    window_index = 0
    meas_accepts = 0
    meas_proposals = 0
    range_rejected = 0
    pd_rejected = 0
    G = None

    total_sweeps = config.burn_in + config.sweeps
    for sweep in range(total_sweeps):
        measuring = sweep >= config.burn_in
        if use_det:
            G = _refresh_inverse(graph, t)
        for v in range(V):
            delta_t = sigma[v] * rng.standard_normal()
            u = rng.random()
            tv_new = t[v] + delta_t
            if measuring:
                meas_proposals += 1
            else:
                window_proposals[v] += 1
            if abs(tv_new) > T_RANGE_LIMIT:
                range_rejected += 1
                continue
            nbr, Jv = plan.nbr[v], plan.J[v]
            dF = float(np.dot(Jv, np.cosh(tv_new - t[nbr])
                              - np.cosh(t[v] - t[nbr]))) if len(nbr) else 0.0
            dM = plan.eps[v] * (math.cosh(tv_new) - math.cosh(t[v]))
            log_ratio = -dF - dM
            if use_det:
                # rank-(deg+1) perturbation of Delta:
                #   Delta' = Delta + U diag(w) U^T,   U = A on the sub-basis
                grow = math.exp(delta_t) - 1.0
                cond = Jv * np.exp(t[v] + t[nbr]) if len(nbr) else Jv
                if plan.eps[v] > 0:
                    w = grow * np.concatenate((cond,
                                               [plan.eps[v] * math.exp(t[v])]))
                else:
                    w = grow * cond
                A, rows = plan.A[v], plan.rows[v]
                S = A @ G[np.ix_(rows, rows)] @ A.T
                core = np.eye(len(w)) + w[:, None] * S
                detfac = float(np.linalg.det(core))
                if not (detfac > 0.0) or not math.isfinite(detfac):
                    pd_rejected += 1
                    continue
                log_ratio += a * (-2.0 * delta_t + math.log(detfac))
            if log_ratio < 0 and math.log(u) >= log_ratio:
                continue
            if use_det:
                # Woodbury: G' = G - X (I + WS)^{-1} W X^T with X = G U
                X = G[:, rows] @ A.T
                Y = np.linalg.solve(core, w[:, None] * X.T)
                G -= X @ Y
            t[v] = tv_new
            if measuring:
                meas_accepts += 1
            else:
                window_accepts[v] += 1
        if measuring:
            samples[sweep - config.burn_in] = t
        else:
            boundary = (sweep + 1) % config.adapt_window == 0
            if boundary or sweep + 1 == config.burn_in:
                window_index += 1
                gain = 1.0 / math.sqrt(window_index)
                rate = window_accepts / np.maximum(window_proposals, 1.0)
                sigma *= np.exp(gain * (rate - config.target_acceptance))
                np.clip(sigma, 1e-3, 50.0, out=sigma)
                window_accepts[:] = 0.0
                window_proposals[:] = 0.0

    acceptance = meas_accepts / max(meas_proposals, 1)
    return samples, acceptance, sigma, range_rejected, pd_rejected


def run_chains(graph, a, config, progress=False):
    """Sample the t-field measure at parameter ``a`` on a pinned graph.

    Runs ``config.chains`` independent adaptive Metropolis chains (see the
    module docstring for the move mechanics) and returns every measurement
    sweep.  Identical ``(graph, a, config)`` always produce bitwise
    identical samples, regardless of ``config.workers``.

    Parameters
    ----------
    graph : WeightedGraph
        Must carry strictly positive pinning in every component, else the
        measure is not normalisable.
    a : float
        Determinant exponent.  Negative values are accepted but flagged
        with :class:`ExperimentalWarning`.
    config : McmcConfig

    Returns
    -------
    SampleSet
    """
    a = float(a)
    if not graph.pinned_everywhere():
        raise ValueError("every component needs a pinned vertex")
    if a < 0:
        warnings.warn("a < 0 is outside the verified regime",
                      ExperimentalWarning, stacklevel=2)
    children = np.random.SeedSequence(config.seed).spawn(config.chains)
    if config.workers > 1:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=config.workers)(
            delayed(_run_single_chain)(graph, a, config, child)
            for child in children)
    else:
        results = [_run_single_chain(graph, a, config, child)
                   for child in children]
    t = np.stack([r[0] for r in results])
    return SampleSet(
        graph=graph, a=a, config=config, t=t,
        acceptance=tuple(r[1] for r in results),
        proposal_scales=np.stack([r[2] for r in results]),
        range_rejected=sum(r[3] for r in results),
        pd_rejected=sum(r[4] for r in results))


# ----------------------------------------------------------------------
# estimates and error bars
# ----------------------------------------------------------------------

def _split_rhat(series):
    """Split R-hat over chain halves; series is (chains, n)."""
    n = series.shape[1] // 2
    if n < 2:
        return float("nan")
    halves = np.concatenate((series[:, :n], series[:, n:2 * n]), axis=0)
    means = halves.mean(axis=1)
    variances = halves.var(axis=1, ddof=1)
    W = variances.mean()
    B = n * means.var(ddof=1)
    if W <= 0:
        return 1.0
    var_hat = (n - 1) / n * W + B / n
    return math.sqrt(var_hat / W)


def series_stats(name, series, acceptance=float("nan"), warn=True):
    """Batch-means summary of per-chain scalar series.

    Parameters
    ----------
    series : array (chains, n)
        One scalar per stored sweep per chain, in chain order.
    """
    series = np.asarray(series, dtype=float)
    chains, n = series.shape
    mean = float(series.mean())
    per_chain = max(N_BATCHES // chains, 1)
    width = n // per_chain
    if width >= 1:
        trimmed = series[:, :per_chain * width]
        batches = trimmed.reshape(chains * per_chain, width).mean(axis=1)
    else:
        batches = series.reshape(-1)
    if len(batches) > 1 and np.ptp(batches) > 0:
        stderr = float(batches.std(ddof=1) / math.sqrt(len(batches)))
    else:
        stderr = 0.0
    var = float(series.var(ddof=1)) if series.size > 1 else 0.0
    ess = var / stderr**2 if stderr > 0 else float(series.size)
    rhat = _split_rhat(series)
    if warn and math.isfinite(rhat) and rhat > RHAT_THRESHOLD:
        warnings.warn(f"{name}: split R-hat {rhat:.3f} > {RHAT_THRESHOLD}",
                      NonConvergenceWarning, stacklevel=2)
    return ChainStats(name=name, mean=mean, stderr=stderr, ess=float(ess),
                      rhat=float(rhat),
                      acceptance=float(acceptance), n_samples=n,
                      chains=chains)


def observable_stats(samples, func, name):
    """Apply ``func`` to each chain's (n, V) block and summarise.

    ``func`` must map an (n, V) array of configurations to a length-n
    series of observable values.
    """
    series = np.stack([np.asarray(func(chain), dtype=float)
                       for chain in samples.t])
    acc = float(np.mean(samples.acceptance))
    return series_stats(name, series, acceptance=acc)


def moment_estimate(samples, v):
    """Estimate <exp(2 a t_v)>; equals 1 exactly for half-integer a."""
    a = samples.a
    return observable_stats(samples, lambda T: np.exp(2.0 * a * T[:, v]),
                            f"exp(2a t_{v})")


@dataclass(frozen=True)
class FourierEstimate:
    """Complex sample mean of exp(i k (t_m - t_l)) with componentwise errors."""

    k: float
    m: int
    ell: int
    real: ChainStats
    imag: ChainStats

    @property
    def estimate(self):
        return complex(self.real.mean, self.imag.mean)

    @property
    def magnitude(self):
        return abs(self.estimate)

    @property
    def sigma_abs(self):
        """Conservative standard error for the magnitude."""
        return math.hypot(self.real.stderr, self.imag.stderr)


def fourier_estimate(samples, k, m, ell):
    """Characteristic-function estimate of ``t_m - t_ell`` at frequency k.

    ``k = 0`` and ``m = ell`` short-circuit to the exact value 1 with zero
    error, since the observable is constant.
    """
    k = float(k)
    acc = float(np.mean(samples.acceptance))
    if k == 0.0 or m == ell:
        n = samples.t.shape[1]
        const = ChainStats("const", 1.0, 0.0, float(samples.t.shape[0] * n),
                           1.0, acc, n, samples.t.shape[0])
        zero = ChainStats("const", 0.0, 0.0, float(samples.t.shape[0] * n),
                          1.0, acc, n, samples.t.shape[0])
        return FourierEstimate(k=k, m=m, ell=ell, real=const, imag=zero)
    label = f"exp(i{k}(t_{m}-t_{ell}))"
    diff = samples.t[:, :, m] - samples.t[:, :, ell]
    real = series_stats(label + ".re", np.cos(k * diff), acceptance=acc)
    imag = series_stats(label + ".im", np.sin(k * diff), acceptance=acc)
    return FourierEstimate(k=k, m=m, ell=ell, real=real, imag=imag)


def laplace_estimate(samples, p, v):
    """Estimate <exp(p (t_v - t_o))> with o the graph's pinned origin."""
    o = samples.graph.origin
    if v == o:
        n = samples.t.shape[1]
        return ChainStats(f"exp({p}(t_{v}-t_{o}))", 1.0, 0.0,
                          float(samples.t.shape[0] * n), 1.0,
                          float(np.mean(samples.acceptance)), n,
                          samples.t.shape[0])
    return observable_stats(
        samples, lambda T: np.exp(float(p) * (T[:, v] - T[:, o])),
        f"exp({p}(t_{v}-t_{o}))")


def _axis_vertices(graph, distance):
    """Grid vertices exactly ``distance`` steps from the origin on an axis."""
    if graph.coords is None:
        raise ValueError("graph carries no coordinates")
    ox, oy = graph.coords[graph.origin]
    out = []
    for dx, dy in ((distance, 0), (-distance, 0), (0, distance),
                   (0, -distance)):
        try:
            out.append(vertex_at(graph, ox + dx, oy + dy))
        except ValueError:
            pass
    if not out:
        raise ValueError(f"no axis vertex at distance {distance}")
    return out


def laplace_decay_fit(samples, p, distances):
    """Weighted log-log fit of <exp(p(t_v - t_0))> against distance.

    For each distance the observable is averaged over the axis-aligned
    vertices at that Euclidean distance from the origin (they are
    exchangeable on a centred box), which costs nothing and reduces the
    variance.  Returns ``(slope, slope_err, points)`` where points is a
    list of ``(distance, ChainStats)``; only the sign of the slope is a
    statement worth asserting, so callers should test
    ``slope + 2*slope_err < 0`` or similar.
    """
    graph = samples.graph
    o = graph.origin
    points = []
    for d in distances:
        verts = _axis_vertices(graph, d)
        def ring_mean(T, verts=tuple(verts)):
            cols = [np.exp(float(p) * (T[:, v] - T[:, o])) for v in verts]
            return np.mean(cols, axis=0)
        points.append((d, observable_stats(samples, ring_mean,
                                           f"exp({p}(t_d{d}-t_0))")))
    xs = np.array([math.log(d) for d, _ in points])
    ys = np.array([math.log(st.mean) for _, st in points])
    sig = np.array([max(st.stderr / st.mean, 1e-12) for _, st in points])
    wts = 1.0 / sig**2
    W = wts.sum()
    xbar = float((wts * xs).sum() / W)
    ybar = float((wts * ys).sum() / W)
    sxx = float((wts * (xs - xbar) ** 2).sum())
    slope = float((wts * (xs - xbar) * (ys - ybar)).sum() / sxx)
    slope_err = math.sqrt(1.0 / sxx)
    return slope, slope_err, points


def green_expectation(samples, ell, k):
    """Monte Carlo mean of the Green entry G_{ell,k}(t)."""
    graph = samples.graph

    def entry(T):
        return np.array([green_matrix(graph, row)[ell, k] for row in T])

    return observable_stats(samples, entry, f"G[{ell},{k}]")


def bundle_estimate(samples, i, j, func, name="bundle"):
    """Mean of an arbitrary function of the Green bundle at pair (i, j)."""
    graph = samples.graph

    def series(T):
        return np.array([func(green_bundle(graph, row, i, j)) for row in T])

    return observable_stats(samples, series, name)


# ----------------------------------------------------------------------
# deterministic quadrature references
# ----------------------------------------------------------------------

def single_site_expectation(eps, a, func):
    """Exact <func(t)> on the one-vertex graph with pinning ``eps``.

    The density is exp(-eps(cosh t - 1)) (eps e^{-t})^a / sqrt(2 pi); all
    t-independent prefactors cancel in the ratio.
    """
    eps, a = float(eps), float(a)
    if eps <= 0:
        raise ValueError("single-site measure needs eps > 0")

    def weight(t):
        # cosh wins both tails; report a clean 0 where it would overflow
        try:
            e = -eps * (math.cosh(t) - 1.0) - a * t
        except OverflowError:
            return 0.0
        return math.exp(e) if e < 700.0 else math.inf

    def integrand(t):
        w = weight(t)
        return func(t) * w if w > 0.0 else 0.0

    num, _ = scipy.integrate.quad(integrand, -np.inf, np.inf, limit=200)
    den, _ = scipy.integrate.quad(weight, -np.inf, np.inf, limit=200)
    return num / den


def batched_density(graph, a, T):
    """Unnormalised density at each row of the (N, V) batch ``T``.

    Vectorised mirror of ``graphs.log_density``: the determinant factor
    comes from a batched ``slogdet``.  Non-positive-definite or
    overflowed rows get density 0, which is where the measure puts them
    anyway.
    """
    T = np.asarray(T, dtype=float)
    N, V = T.shape
    F = np.zeros(N)
    for (i, j, J) in graph.edges:
        F += float(J) * (np.cosh(T[:, i] - T[:, j]) - 1.0)
    M = np.zeros(N)
    eps = np.array([float(e) for e in graph.eps])
    for v in range(V):
        if eps[v]:
            M += eps[v] * (np.cosh(T[:, v]) - 1.0)
    logdens = -F - M
    if a != 0:
        D = np.zeros((N, V, V))
        for (i, j, J) in graph.edges:
            J = float(J)
            D[:, i, j] -= J
            D[:, j, i] -= J
            D[:, i, i] += J * np.exp(T[:, j] - T[:, i])
            D[:, j, j] += J * np.exp(T[:, i] - T[:, j])
        for v in range(V):
            if eps[v]:
                D[:, v, v] += eps[v] * np.exp(-T[:, v])
        sign, logdet = np.linalg.slogdet(D)
        logdens = np.where(sign > 0, logdens + float(a) * logdet, -np.inf)
    with np.errstate(over="ignore", under="ignore"):
        return np.exp(logdens - np.nanmax(logdens[np.isfinite(logdens)]))


def batched_green(graph, T):
    """Green matrices D(t)^{-1} for every row of the (N, V) batch."""
    T = np.asarray(T, dtype=float)
    N, V = T.shape
    D = np.zeros((N, V, V))
    for (i, j, J) in graph.edges:
        J = float(J)
        D[:, i, j] -= J
        D[:, j, i] -= J
        D[:, i, i] += J * np.exp(T[:, j] - T[:, i])
        D[:, j, j] += J * np.exp(T[:, i] - T[:, j])
    for v, e in enumerate(graph.eps):
        if e:
            D[:, v, v] += float(e) * np.exp(-T[:, v])
    return np.linalg.inv(D)


_QUAD_NODES = {1: 400, 2: 180, 3: 100}


def quadrature_expectation(graph, a, func, half_width=12.0, nodes=None):
    """Exact <func(t)> by tensor Gauss-Legendre quadrature, <= 3 vertices.

    ``func`` receives the full (N, V) node batch and must return one value
    per row -- the same convention the sampler observables use, so an
    observable can be checked against this oracle verbatim.  The grid is
    dense enough for ~1e-9 accuracy on these smooth, cosh-confined
    densities; widen ``half_width`` for very weak pinning.
    """
    V = graph.n_vertices
    if V > 3:
        raise ValueError("quadrature oracle is for graphs with <= 3 vertices")
    n = nodes or _QUAD_NODES[V]
    x, w = np.polynomial.legendre.leggauss(n)
    x = half_width * x
    w = half_width * w
    grids = np.meshgrid(*([x] * V), indexing="ij")
    T = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.ones(1)
    for _ in range(V):
        wts = np.multiply.outer(wts, w).ravel()
    dens = batched_density(graph, a, T) * wts
    vals = np.asarray(func(T), dtype=float)
    den = float(np.sum(dens))
    return float(np.sum(vals * dens)) / den


# ----------------------------------------------------------------------
# manifests and result tables
# ----------------------------------------------------------------------

def run_manifest(graph, a, config):
    """JSON-ready description of a run plus a content hash of its inputs."""
    body = {
        "graph": json.loads(graph.to_json()),
        "a": str(Fraction(a).limit_denominator(10**9)) if not isinstance(
            a, (int, Fraction)) else str(Fraction(a)),
        "config": asdict(config),
    }
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
    body["content_hash"] = hashlib.sha256(canon.encode()).hexdigest()
    return body


def stats_to_csv(stats):
    """Render ChainStats rows as CSV text (observable, estimate, errors)."""
    lines = ["observable,estimate,stderr,ess,rhat,acceptance"]
    for st in stats:
        lines.append(f"{st.name},{st.mean:.17g},{st.stderr:.17g},"
                     f"{st.ess:.17g},{st.rhat:.17g},{st.acceptance:.17g}")
    return "\n".join(lines) + "\n"
