"""Discrete-time stochastic SIR with delayed isolation on contact graphs.

Daily synchronous updates: a susceptible with m non-isolated infectious
neighbors becomes infectious the next day with probability 1 - (1-rho)^m;
infectious nodes (isolated or not) recover with per-day probability
1 - exp(-gamma); a newly infected node is scheduled for isolation with
probability alpha, t_delay (rounded to whole days) after the day it became
infectious, and moves to Isolated at the start of that day if still
infectious. Isolation is permanent and only blocks transmission.

Each day's uniform variates are drawn once in the driver and consumed
identically by the numba day-sweep kernel and its vectorized numpy
fallback, so both paths produce bit-identical epidemics. Runs within an
ensemble use independently derived RNG streams; aggregation order is fixed,
so results do not depend on the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._accel import USE_NUMBA, maybe_njit
from .graphs import ContactGraph, generate_graph
from .params import EpidemicParams, ModelError

SUSCEPTIBLE = 0
INFECTIOUS = 1
ISOLATED = 2
REMOVED = 3

SEEDING_MODES = ("uniform", "degree")


@dataclass(frozen=True)
class GraphSpec:
    """Recipe for regenerating a graph inside an ensemble."""

    kind: str
    node_count: int
    mean_degree: float
    ws_rewire: float = 0.1

    def build(self, seed) -> ContactGraph:
        return generate_graph(self.kind, self.node_count, self.mean_degree, seed,
                              ws_rewire=self.ws_rewire)


@dataclass
class EpidemicState:
    """Mutable per-node epidemic state for one run.

    status holds the compartment codes; iso_day/inf_day are -1 when unset,
    and iso_day = inf_day + round(t_delay) whenever scheduled.
    """

    status: np.ndarray
    iso_day: np.ndarray
    inf_day: np.ndarray
    day: int


@dataclass(frozen=True)
class DayMetrics:
    day: int
    s: int
    i: int
    r: int
    isolated: int
    mean_inf_degree: float


def seed_infections(graph: ContactGraph, count: int, mode: str,
                    rng: np.random.Generator) -> np.ndarray:
    """Choose initially infectious nodes, uniformly or with probability
    proportional to degree, without replacement."""
    if mode not in SEEDING_MODES:
        raise ModelError(f"unknown seeding mode {mode!r}; choose from {SEEDING_MODES}")
    if count > graph.node_count:
        raise ModelError(f"cannot seed {count} infections among {graph.node_count} nodes")
    if mode == "uniform":
        return rng.choice(graph.node_count, size=count, replace=False)
    weights = graph.degrees.astype(np.float64)
    return rng.choice(graph.node_count, size=count, replace=False, p=weights / weights.sum())


def infection_prob_table(rho: float, max_degree: int) -> np.ndarray:
    """p[m] = 1 - (1-rho)^m, shared by both sweep paths so they agree
    bit-for-bit."""
    return 1.0 - np.power(1.0 - rho, np.arange(max_degree + 1, dtype=np.float64))


def init_state(graph: ContactGraph, seeds: np.ndarray, params: EpidemicParams,
               rng: np.random.Generator, start_day: int = 1) -> EpidemicState:
    """Day-`start_day` state with the given seed nodes infectious and the
    isolation scheme already applied to them."""
    n = graph.node_count
    status = np.zeros(n, dtype=np.int8)
    iso_day = np.full(n, -1, dtype=np.int64)
    inf_day = np.full(n, -1, dtype=np.int64)
    status[seeds] = INFECTIOUS
    inf_day[seeds] = start_day
    t_days = int(round(params.t_delay))
    picked = rng.random(len(seeds)) < params.alpha
    iso_day[seeds[picked]] = start_day + t_days
    due = (status == INFECTIOUS) & (iso_day == start_day)
    status[due] = ISOLATED
    return EpidemicState(status=status, iso_day=iso_day, inf_day=inf_day, day=start_day)


@maybe_njit(cache=True, nogil=True)
def _day_sweep_loop(indptr, indices, status, iso_day, inf_day, day,
                    p_table, p_rec, alpha, t_days, u_inf, u_rec, u_iso, counts):
    """Advance one day in place (loop form, the numba-compiled hot kernel)."""
    n = status.shape[0]
    for v in range(n):
        counts[v] = 0
    for v in range(n):
        if status[v] == INFECTIOUS:
            for e in range(indptr[v], indptr[v + 1]):
                w = indices[e]
                if status[w] == SUSCEPTIBLE:
                    counts[w] += 1
    for v in range(n):
        st = status[v]
        if (st == INFECTIOUS or st == ISOLATED) and u_rec[v] < p_rec:
            status[v] = REMOVED
    for w in range(n):
        if status[w] == SUSCEPTIBLE and counts[w] > 0:
            if u_inf[w] < p_table[counts[w]]:
                status[w] = INFECTIOUS
                inf_day[w] = day + 1
                if u_iso[w] < alpha:
                    iso_day[w] = day + 1 + t_days
    for v in range(n):
        if status[v] == INFECTIOUS and iso_day[v] == day + 1:
            status[v] = ISOLATED


def _day_sweep_numpy(indptr, indices, status, iso_day, inf_day, day,
                     p_table, p_rec, alpha, t_days, u_inf, u_rec, u_iso, counts):
    """Vectorized fallback; consumes the same uniforms in the same roles as
    the loop kernel and therefore produces identical states."""
    # by symmetry, the sum of transmitting[] over CSR row w counts the
    # infectious neighbors of w
    transmitting = (status == INFECTIOUS).astype(np.int64)
    cs = np.concatenate(([0], np.cumsum(transmitting[indices])))
    counts[:] = cs[indptr[1:]] - cs[indptr[:-1]]

    recover = ((status == INFECTIOUS) | (status == ISOLATED)) & (u_rec < p_rec)
    infect = (status == SUSCEPTIBLE) & (counts > 0) & (u_inf < p_table[counts])
    status[recover] = REMOVED
    status[infect] = INFECTIOUS
    inf_day[infect] = day + 1
    schedule = infect & (u_iso < alpha)
    iso_day[schedule] = day + 1 + t_days
    due = (status == INFECTIOUS) & (iso_day == day + 1)
    status[due] = ISOLATED


def metrics_from_state(graph: ContactGraph, state: EpidemicState) -> DayMetrics:
    counts = np.bincount(state.status, minlength=4)
    infected_alive = (state.status == INFECTIOUS) | (state.status == ISOLATED)
    n_alive = int(infected_alive.sum())
    mean_deg = float(graph.degrees[infected_alive].mean()) if n_alive else math.nan
    return DayMetrics(
        day=state.day,
        s=int(counts[SUSCEPTIBLE]),
        i=int(counts[INFECTIOUS]),
        r=int(counts[REMOVED]),
        isolated=int(counts[ISOLATED]),
        mean_inf_degree=mean_deg,
    )


def step_day(graph: ContactGraph, state: EpidemicState, params: EpidemicParams,
             rng: np.random.Generator, _scratch=None) -> DayMetrics:
    """Advance the epidemic one day and return the new day's metrics.

    Draws three length-n uniform arrays (infection, recovery, isolation) in
    a fixed order, then dispatches to the compiled or vectorized sweep.
    """
    n = graph.node_count
    u_inf = rng.random(n)
    u_rec = rng.random(n)
    u_iso = rng.random(n)
    counts = _scratch if _scratch is not None else np.zeros(n, dtype=np.int64)
    p_table = infection_prob_table(params.rho, int(graph.degrees.max()))
    p_rec = -math.expm1(-params.gamma)
    sweep = _day_sweep_loop if USE_NUMBA else _day_sweep_numpy
    sweep(graph.indptr, graph.indices, state.status, state.iso_day, state.inf_day,
          state.day, p_table, p_rec, params.alpha, int(round(params.t_delay)),
          u_inf, u_rec, u_iso, counts)
    state.day += 1
    return metrics_from_state(graph, state)


@dataclass(frozen=True)
class RunResult:
    """Per-day series of one simulated epidemic plus its graph census."""

    s: np.ndarray
    i: np.ndarray
    r: np.ndarray
    isolated: np.ndarray
    mean_inf_degree: np.ndarray
    census_mu: float
    census_var: float


def run_single(graph: ContactGraph, params: EpidemicParams, seeding: str,
               seed_count: int, days: int, rng: np.random.Generator) -> RunResult:
    """One epidemic over `days` days; day 1 is the seeded initial state."""
    if days < 1:
        raise ModelError(f"days must be >= 1, got {days}")
    seeds = seed_infections(graph, seed_count, seeding, rng)
    state = init_state(graph, seeds, params, rng)
    n = graph.node_count
    s = np.empty(days, dtype=np.int64)
    i = np.empty(days, dtype=np.int64)
    r = np.empty(days, dtype=np.int64)
    iso = np.empty(days, dtype=np.int64)
    mdeg = np.empty(days, dtype=np.float64)
    p_table = infection_prob_table(params.rho, int(graph.degrees.max()))
    p_rec = -math.expm1(-params.gamma)
    t_days = int(round(params.t_delay))
    counts = np.zeros(n, dtype=np.int64)
    sweep = _day_sweep_loop if USE_NUMBA else _day_sweep_numpy

    def record(idx: int):
        m = metrics_from_state(graph, state)
        s[idx], i[idx], r[idx], iso[idx], mdeg[idx] = m.s, m.i, m.r, m.isolated, m.mean_inf_degree

    record(0)
    for d in range(days - 1):
        u_inf = rng.random(n)
        u_rec = rng.random(n)
        u_iso = rng.random(n)
        sweep(graph.indptr, graph.indices, state.status, state.iso_day, state.inf_day,
              state.day, p_table, p_rec, params.alpha, t_days, u_inf, u_rec, u_iso, counts)
        state.day += 1
        record(d + 1)
    mu, var = graph.census()
    return RunResult(s=s, i=i, r=r, isolated=iso, mean_inf_degree=mdeg,
                     census_mu=mu, census_var=var)


@dataclass(frozen=True)
class NetworkEnsembleStats:
    """Per-run daily series and their ensemble aggregates.

    Array shapes are (runs, days); day indices start at 1 (the seeded
    state). mean_inf_degree is NaN on days a run has no infectious node.
    Per-run RNG streams derive from base_seed as SeedSequence(base_seed,
    spawn_key=(run, 0)) for the graph and (run, 1) for the epidemic.
    """

    days: np.ndarray
    s: np.ndarray
    i: np.ndarray
    r: np.ndarray
    isolated: np.ndarray
    mean_inf_degree: np.ndarray
    census_mu: np.ndarray
    census_var: np.ndarray
    base_seed: int
    run_count: int

    @property
    def node_count(self) -> int:
        return int(self.s[0, 0] + self.i[0, 0] + self.r[0, 0] + self.isolated[0, 0])

    def ensemble_mean_inf_degree(self) -> np.ndarray:
        return np.nanmean(self.mean_inf_degree, axis=0)

    def stderr_inf_degree(self) -> np.ndarray:
        valid = np.sum(~np.isnan(self.mean_inf_degree), axis=0)
        sd = np.nanstd(self.mean_inf_degree, axis=0, ddof=1) if self.run_count > 1 else (
            np.zeros(len(self.days)))
        return sd / np.sqrt(np.maximum(valid, 1))


def run_ensemble(
    spec: GraphSpec,
    params: EpidemicParams,
    seeding: str = "uniform",
    runs: int = 100,
    days: int = 30,
    seed_count: int = 10,
    base_seed: int = 0,
    reuse_graph: bool = False,
    threads: int = 1,
) -> NetworkEnsembleStats:
    """Run independent seeded epidemics and aggregate their daily metrics.

    By default each run regenerates its own graph realization; with
    reuse_graph one realization (run-0 graph stream) is shared. Threads only
    affect wall time, never results.
    """
    if runs < 1:
        raise ModelError(f"runs must be >= 1, got {runs}")
    shared = spec.build(np.random.SeedSequence(base_seed, spawn_key=(0, 0))) if reuse_graph else None

    def one_run(run: int) -> RunResult:
        graph = shared if shared is not None else spec.build(
            np.random.SeedSequence(base_seed, spawn_key=(run, 0)))
        rng = np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(run, 1)))
        return run_single(graph, params, seeding, seed_count, days, rng)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_run, range(runs)))
    else:
        results = [one_run(run) for run in range(runs)]

    stack = lambda attr: np.stack([getattr(res, attr) for res in results])
    return NetworkEnsembleStats(
        days=np.arange(1, days + 1, dtype=np.int64),
        s=stack("s"),
        i=stack("i"),
        r=stack("r"),
        isolated=stack("isolated"),
        mean_inf_degree=stack("mean_inf_degree"),
        census_mu=np.array([res.census_mu for res in results]),
        census_var=np.array([res.census_var for res in results]),
        base_seed=base_seed,
        run_count=runs,
    )


def write_runs_csv(stats: NetworkEnsembleStats, path) -> None:
    """Per-run rows: day,run,S,I,R,isolated,mean_inf_degree."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("day,run,S,I,R,isolated,mean_inf_degree\n")
        for run in range(stats.run_count):
            for d in range(len(stats.days)):
                fh.write(
                    f"{stats.days[d]},{run},{stats.s[run, d]},{stats.i[run, d]},"
                    f"{stats.r[run, d]},{stats.isolated[run, d]},"
                    f"{stats.mean_inf_degree[run, d]:.17g}\n"
                )


def write_aggregate_csv(stats: NetworkEnsembleStats, path) -> None:
    """Ensemble means per day plus the across-run spread of the infectious
    mean degree."""
    mean_s = stats.s.mean(axis=0)
    mean_i = stats.i.mean(axis=0)
    mean_r = stats.r.mean(axis=0)
    mean_iso = stats.isolated.mean(axis=0)
    mean_deg = stats.ensemble_mean_inf_degree()
    sd_deg = (np.nanstd(stats.mean_inf_degree, axis=0, ddof=1)
              if stats.run_count > 1 else np.zeros(len(stats.days)))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("day,mean_S,mean_I,mean_R,mean_isolated,mean_inf_degree,stddev_inf_degree\n")
        for d in range(len(stats.days)):
            fh.write(
                f"{stats.days[d]},{mean_s[d]:.17g},{mean_i[d]:.17g},{mean_r[d]:.17g},"
                f"{mean_iso[d]:.17g},{mean_deg[d]:.17g},{sd_deg[d]:.17g}\n"
            )
