"""End-to-end acceptance gate.

Each test is one published guarantee of the package, with its tolerance and
(where stated) runtime budget pinned.  The suite is intentionally flat: one
pass/fail line per guarantee under ``pytest -v``.
"""

import csv
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from epiresponse.cli import main as cli_main
from epiresponse.ctmc import AgentPopulation, simulate_ctmc
from epiresponse.equilibria import (
    EquilibriumKind,
    Verdict,
    equilibrium_infection_vs_gamma,
    find_equilibria_continuous,
    find_equilibria_step,
    sliding_normal_form,
    stability_sliding,
    stability_smooth,
)
from epiresponse.integrator import (
    EventKind,
    IntegratorConfig,
    TerminationReason,
    classify_basin,
    dulac_scan,
    energy_E,
    integrate,
    monotone_M,
)
from epiresponse.model import (
    ClassSpec,
    ConstantResponse,
    ModelParams,
    SigmoidResponse,
    State,
    StepResponse,
    TabulatedResponse,
    field,
)
from epiresponse.traces import (
    Contact,
    ContactTrace,
    TraceExperiment,
    make_complete_mixing_trace,
    run_trace_experiment,
)

FIXTURE = Path(__file__).parent / "data" / "five_node.csv"


def draw_params(rng):
    beta, delta, gamma = rng.uniform(0.01, 10.0, size=3)
    i_star = float(1.0 - rng.uniform(0.0, 1.0))  # (0, 1]
    return ModelParams(float(beta), float(gamma), float(delta)), i_star


def test_criterion_01_equilibrium_correctness():
    """500 random draws: field residual <= 1e-10 at every reported
    equilibrium and the exact X0/X1/X2 admissibility pattern."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    for _ in range(500):
        params, i_star = draw_params(rng)
        spec = StepResponse(i_star)
        eqs = find_equilibria_step(params, i_star)

        kinds = [eq.kind for eq in eqs]
        i1 = params.gamma * (1.0 - params.delta / params.beta) / (
            params.gamma + params.delta
        )
        expected = [EquilibriumKind.DISEASE_FREE]
        if params.delta < params.beta:
            expected.append(
                EquilibriumKind.ENDEMIC if i1 < i_star else EquilibriumKind.SLIDING
            )
        assert kinds == expected

        for eq in eqs:
            residual = field(params, spec, eq.point).distance_to_zero()
            assert residual <= 1e-10
            assert eq.admissible
    assert time.perf_counter() - t0 < 5.0


def test_criterion_02_stability_classification():
    """X0 eigenvalues exactly (-gamma, beta-delta); X1 stable whenever it
    exists; A+ < 0 < A- with A+ - A- < 0 on 200 sliding-admissible draws;
    normal-form partials match central finite differences to 1e-5."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)

    for _ in range(500):
        params, i_star = draw_params(rng)
        spec = StepResponse(i_star)
        eqs = find_equilibria_step(params, i_star)
        rep = stability_smooth(params, spec, eqs[0])
        lam = sorted(ev.real for ev in rep.eigenvalues)
        expect = sorted((-params.gamma, params.beta - params.delta))
        assert abs(lam[0] - expect[0]) <= 1e-12
        assert abs(lam[1] - expect[1]) <= 1e-12
        assert all(ev.imag == 0.0 for ev in rep.eigenvalues)
        for eq in eqs[1:]:
            if eq.kind is EquilibriumKind.ENDEMIC:
                assert (
                    stability_smooth(params, spec, eq).verdict
                    is Verdict.ASYMPTOTICALLY_STABLE
                )

    checked = 0
    while checked < 200:
        params, i_star = draw_params(rng)
        i1 = params.gamma * (1.0 - params.delta / params.beta) / (
            params.gamma + params.delta
        )
        if not (params.delta < params.beta and i_star <= i1):
            continue
        checked += 1
        rep = stability_sliding(params, i_star)
        assert rep.a_plus < 0.0
        assert rep.a_minus > 0.0
        assert rep.a_plus - rep.a_minus < 0.0
        assert rep.verdict is Verdict.ASYMPTOTICALLY_STABLE

        nf = sliding_normal_form(params, i_star)
        h = 1e-6
        pairs = [
            (nf.p_x, (nf.p_plus(h, 0.0) - nf.p_plus(-h, 0.0)) / (2 * h)),
            (nf.p_x, (nf.p_minus(h, 0.0) - nf.p_minus(-h, 0.0)) / (2 * h)),
            (nf.p_plus_y, (nf.p_plus(0.0, h) - nf.p_plus(0.0, -h)) / (2 * h)),
            (nf.p_minus_y, (nf.p_minus(0.0, h) - nf.p_minus(0.0, -h)) / (2 * h)),
            (nf.q_x, (nf.q(h, 0.0) - nf.q(-h, 0.0)) / (2 * h)),
            (nf.q_y, (nf.q(0.0, h) - nf.q(0.0, -h)) / (2 * h)),
            (nf.q_xx, (nf.q(h, 0.0) - 2 * nf.q(0.0, 0.0) + nf.q(-h, 0.0)) / h**2),
        ]
        for closed, fd in pairs:
            assert abs(closed - fd) <= 1e-5 * max(1.0, abs(closed))
    assert time.perf_counter() - t0 < 10.0


def test_criterion_03_convergence_to_equilibrium():
    """20x20 basin grids in the three reference regimes all converge to the
    predicted equilibrium (within 1e-6, no Unresolved) by t_max = 1e4."""
    t0 = time.perf_counter()
    axis = np.linspace(1.0 / 21.0, 20.0 / 21.0, 20)
    grid = [
        State(float(s), float(i))
        for s in axis
        for i in axis
        if s + i <= 1.0 - 1.0 / 21.0 + 1e-12
    ]
    regimes = [
        (ModelParams(1.0, 1.0, 0.5), 0.5, EquilibriumKind.ENDEMIC),
        (ModelParams(1.0, 1.0, 0.5), 0.2, EquilibriumKind.SLIDING),
        (ModelParams(0.4, 1.0, 0.5), 0.5, EquilibriumKind.DISEASE_FREE),
    ]
    for params, i_star, expected in regimes:
        labels = classify_basin(params, StepResponse(i_star), grid)
        assert len(labels) == len(grid)
        assert set(labels.values()) == {expected}
    # infection-free starts belong to the disease-free point even when the
    # epidemic regime is supercritical
    labels = classify_basin(
        ModelParams(1.0, 1.0, 0.5),
        StepResponse(0.5),
        [State(0.3, 0.0), State(0.9, 0.0)],
    )
    assert set(labels.values()) == {EquilibriumKind.DISEASE_FREE}
    assert time.perf_counter() - t0 < 60.0


def test_criterion_04_energy_and_monotone_diagnostics():
    """E conserved (relative drift <= 1e-6) while protecting; M
    non-increasing (1e-8 per-step slack) while relaxed."""
    params = ModelParams(1.0, 1.0, 0.5)

    spec = StepResponse(0.1)
    for s0, i0 in ((0.3, 0.6), (0.15, 0.8), (0.5, 0.45)):
        traj = integrate(params, spec, State(s0, i0), IntegratorConfig(t_max=50.0))
        down = [t for t, k in traj.events if k is EventKind.CROSS_DOWN]
        assert down, f"start ({s0}, {i0}) never crossed down"
        e0 = energy_E(params, State(s0, i0))
        scale = max(1.0, abs(e0))
        for t, x in traj.samples:
            if t >= down[0]:
                break
            assert abs(energy_E(params, x) - e0) / scale <= 1e-6

    spec = StepResponse(0.5)
    for s0, i0 in ((0.9, 0.05), (0.6, 0.1), (0.3, 0.45)):
        traj = integrate(params, spec, State(s0, i0))
        assert traj.reason is TerminationReason.EQUILIBRIUM
        assert not any(
            k in (EventKind.CROSS_UP, EventKind.CROSS_DOWN) for _, k in traj.events
        )
        prev = monotone_M(params, State(s0, i0))
        for _, x in traj.samples[1:]:
            cur = monotone_M(params, x)
            assert cur <= prev + 1e-8
            prev = cur


def test_criterion_05_gamma_monotonicity():
    """Long-run infection vs update rate: exact closed form with the
    threshold cap for a step response; strictly increasing endemic level
    for a sigmoid response."""
    t0 = time.perf_counter()
    grid = np.logspace(math.log10(0.01), math.log10(100.0), 50)
    beta, delta, i_star = 1.0, 0.5, 0.3

    rows = equilibrium_infection_vs_gamma(beta, delta, i_star, grid)
    levels = [row.i_eq for row in rows]
    for row in rows:
        expected = min((1.0 - delta / beta) / (1.0 + delta / row.gamma), i_star)
        assert abs(row.i_eq - expected) <= 1e-10
    assert all(b >= a for a, b in zip(levels, levels[1:]))
    capped = [row for row in rows if row.kind is EquilibriumKind.SLIDING]
    assert capped and all(row.i_eq == pytest.approx(i_star, abs=1e-12) for row in capped)
    assert rows[0].kind is EquilibriumKind.ENDEMIC

    spec = SigmoidResponse(0.3, 0.05)
    endemic_levels = []
    for gamma in grid:
        eqs = find_equilibria_continuous(ModelParams(beta, float(gamma), delta), spec)
        endemic = [e for e in eqs if e.kind is EquilibriumKind.ENDEMIC]
        assert endemic, f"no endemic point at gamma={gamma}"
        endemic_levels.append(endemic[0].point.i)
    assert all(b > a for a, b in zip(endemic_levels, endemic_levels[1:]))
    assert time.perf_counter() - t0 < 10.0


def test_criterion_06_no_periodic_orbits():
    """Divergence of F/i is strictly negative on a 200x200 grid for 100
    random continuous-response configurations."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    for k in range(100):
        params, i_star = draw_params(rng)
        if k % 3 == 0:
            spec = SigmoidResponse(i_star, float(rng.uniform(0.01, 0.5)))
        elif k % 3 == 1:
            p_sp = float(rng.uniform(0.0, 1.0))
            p_ps = float(rng.uniform(0.0, 1.0))
            spec = ConstantResponse(p_sp, p_ps)
        else:
            knots = np.sort(rng.uniform(0.0, 1.0, size=3))
            knots[1:] += 1e-3 * np.arange(1, 3)  # keep strictly increasing
            up = np.sort(rng.uniform(0.0, 1.0, size=3))
            down = np.sort(rng.uniform(0.0, 1.0, size=3))[::-1]
            spec = TabulatedResponse(
                tuple(float(v) for v in knots),
                tuple(float(v) for v in up),
                tuple(float(v) for v in down),
            )
        assert dulac_scan(params, spec, 200) < 0.0
    assert time.perf_counter() - t0 < 5.0


def test_criterion_07_mean_field_limit():
    """Jump process vs deterministic flow on t in [0, 50]: the sup error
    falls from n=100 to n=10^4 in >= 18 of 20 paired seeds, and the mean
    sample path at n=10^4 stays within 0.02."""
    t0 = time.perf_counter()
    params = ModelParams(1.0, 1.0, 0.5)
    spec = SigmoidResponse(0.5, 0.001)
    grid = np.arange(501) * 0.1
    traj = integrate(params, spec, State(0.99, 0.01),
                     IntegratorConfig(t_max=50.0, store_samples=False))
    reference = traj.evaluate(np.minimum(grid, traj.final_time))

    per_seed = {}
    mean_path_error = {}
    for n in (100, 10_000):
        pop = AgentPopulation.from_fractions(n, 0.99, 0.01)
        errors = []
        acc = np.zeros((501, 2))
        for k in range(20):
            run = simulate_ctmc(params, spec, pop, 50.0, seed=(0, k))
            fractions = run.fractions[:, :2]
            errors.append(float(np.max(np.abs(fractions - reference))))
            acc += fractions
        per_seed[n] = errors
        mean_path_error[n] = float(np.max(np.abs(acc / 20.0 - reference)))

    decreases = sum(1 for a, b in zip(per_seed[100], per_seed[10_000]) if b < a)
    assert decreases >= 18
    assert mean_path_error[10_000] < 0.02
    assert time.perf_counter() - t0 < 180.0


def test_criterion_08_trace_ordering_and_two_class():
    """Synthetic 41-node trace: time-averaged infection strictly increases
    with the update rate (paired one-sided test, 5% level); the high-
    threshold class behaves as if alone while the low-threshold class
    protects more when mixed with it."""
    t0 = time.perf_counter()
    hour = 3600.0
    delta, eps = 1.0 / (6 * hour), 0.001
    trace = make_complete_mixing_trace(
        41, pair_rate=1.0 / hour / 40.0, duration=7 * 86400.0, seed=42
    )

    first = trace.node_ids[0]
    initial_first = {n: ("I" if n == first else "S") for n in trace.node_ids}
    avg_i = []
    for gamma in (1.0 / (24 * hour), 1.0 / (6 * hour), 1.0 / hour):
        res = run_trace_experiment(
            trace,
            TraceExperiment(
                gamma=gamma,
                delta=delta,
                classes=(ClassSpec(1.0, SigmoidResponse(0.9, eps)),),
                initial=initial_first,
                runs=30,
            ),
            seed=2026,
        )
        avg_i.append(res.per_run_avg[:, 0, 1])
    means = [float(a.mean()) for a in avg_i]
    assert means[0] < means[1] < means[2]
    for lo, hi in ((0, 1), (1, 2)):
        _, p = stats.ttest_rel(avg_i[hi], avg_i[lo], alternative="greater")
        assert p < 0.05

    # two classes: 8 low-threshold, 33 high-threshold, seed case in the
    # high-threshold class; solo baselines replay the same trace and seeds
    # with a single class, so the only difference is the population mix
    assignment = {nid: (0 if k < 8 else 1) for k, nid in enumerate(trace.node_ids)}
    seed_node = [n for n in trace.node_ids if assignment[n] == 1][0]
    initial = {n: ("I" if n == seed_node else "S") for n in trace.node_ids}
    gamma = 1.0 / hour
    low, high = SigmoidResponse(0.1, eps), SigmoidResponse(0.9, eps)

    mixed = run_trace_experiment(
        trace,
        TraceExperiment(
            gamma=gamma,
            delta=delta,
            classes=(ClassSpec(8 / 41, low), ClassSpec(33 / 41, high)),
            initial=initial,
            class_assignment=assignment,
            runs=30,
        ),
        seed=2027,
    )
    solo_high = run_trace_experiment(
        trace,
        TraceExperiment(
            gamma=gamma, delta=delta, classes=(ClassSpec(1.0, high),),
            initial=initial, runs=30,
        ),
        seed=2027,
    )
    solo_low = run_trace_experiment(
        trace,
        TraceExperiment(
            gamma=gamma, delta=delta, classes=(ClassSpec(1.0, low),),
            initial=initial, runs=30,
        ),
        seed=2027,
    )

    diff = mixed.per_run_avg[:, 2, 1] - solo_high.per_run_avg[:, 0, 1]
    assert abs(float(diff.mean())) < 0.08

    mixed_p = mixed.per_run_avg[:, 1, 2]
    solo_p = solo_low.per_run_avg[:, 0, 2]
    _, p = stats.ttest_rel(mixed_p, solo_p, alternative="greater")
    assert float(mixed_p.mean()) > float(solo_p.mean())
    assert p < 0.05
    assert time.perf_counter() - t0 < 120.0


def test_criterion_09_temporal_reachability_oracle():
    """Frozen-clock replay equals forward-scan reachability on 50 random
    traces, exactly."""
    rng = np.random.default_rng(909)
    for case in range(50):
        if case % 5 == 0:
            trace = make_complete_mixing_trace(
                int(rng.integers(3, 9)), 0.01, 500.0, seed=int(rng.integers(1 << 30))
            )
        else:
            n = int(rng.integers(4, 15))
            m = int(rng.integers(5, 60))
            contacts = []
            for _ in range(m):
                a, b = rng.choice(n, size=2, replace=False)
                t = float(rng.integers(0, 50)) * 60.0  # coarse: force timestamp ties
                contacts.append(Contact(int(a), int(b), t, t + 30.0))
            trace = ContactTrace.from_contacts(contacts)
        n_seeds = int(rng.integers(1, 3))
        seeds = {int(x) for x in rng.choice(trace.node_ids, size=n_seeds)}
        exp = TraceExperiment(
            gamma=0.0,
            delta=0.0,
            classes=(ClassSpec(1.0, StepResponse(0.5)),),
            initial={nid: ("I" if nid in seeds else "S") for nid in trace.node_ids},
            runs=1,
        )
        res = run_trace_experiment(trace, exp, seed=case)

        infected = set(seeds)
        for c in trace.contacts:
            if c.a in infected and c.b not in infected:
                infected.add(c.b)
            elif c.b in infected and c.a not in infected:
                infected.add(c.a)
        assert res.final_infected(0) == frozenset(infected)


CONFIGS = {
    "equilibria": "beta = 1\ngamma = 1\ndelta = 0.5\nkind = step\ni_star = 0.2\n",
    "integrate": (
        "beta = 1\ngamma = 1\ndelta = 0.5\nkind = step\ni_star = 0.2\n"
        "s0 = 0.9\ni0 = 0.05\nt_max = 6\n"
    ),
    "basin": (
        "beta = 0.4\ngamma = 1\ndelta = 0.5\nkind = step\ni_star = 0.5\ngrid_n = 4\n"
    ),
    "sweep-gamma": (
        "beta = 1\ndelta = 0.5\nkind = step\ni_star = 0.3\n"
        "gamma_min = 0.1\ngamma_max = 10\ngamma_count = 9\n"
    ),
    "simulate": (
        "beta = 1\ngamma = 1\ndelta = 0.5\nkind = step\ni_star = 0.2\n"
        "n = 200\ns0 = 0.9\ni0 = 0.1\nt_max = 5\nsample_dt = 0.5\nseed = 7\n"
    ),
    "converge": (
        "beta = 1\ngamma = 1\ndelta = 0.5\nkind = sigmoid\ni_star = 0.5\n"
        "epsilon = 0.05\nn_list = 50,200\nruns_per_n = 2\ns0 = 0.95\ni0 = 0.05\n"
        "t_max = 5\nsample_dt = 0.5\nseed = 11\n"
    ),
    "trace": (
        "gamma = 0.001\ndelta = 0.0005\ni_star = 0.5\nepsilon = 0.01\n"
        "runs = 3\ngrid_dt = 60\nseed = 3\n"
    ),
}


def test_criterion_10_byte_identical_reruns(tmp_path):
    """Every subcommand, rerun with the same config and seed, writes byte-
    identical output files."""
    for command, cfg in CONFIGS.items():
        cfg_path = tmp_path / f"{command}.cfg"
        cfg_path.write_text(cfg)
        outputs = []
        for attempt in ("a", "b"):
            out = tmp_path / f"{command}-{attempt}"
            argv = ["--config", str(cfg_path), "--out", str(out)]
            if command == "trace":
                code = cli_main([command, *argv, str(FIXTURE)])
            elif command == "integrate":
                code = cli_main([command, *argv, "--vector-field"])
            else:
                code = cli_main([command, *argv])
            assert code == 0, command
            outputs.append(out)
        out_a, out_b = outputs
        files_a = sorted(p.name for p in out_a.iterdir())
        files_b = sorted(p.name for p in out_b.iterdir())
        assert files_a == files_b and files_a, command
        for name in files_a:
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), (
                f"{command}/{name} differs between reruns"
            )
