"""Compare the compiled kernels against the pure-Python fallback.

Times the two hot paths (value-iteration sweeps and Monte Carlo
rollouts) on the heavier bundled domains and prints a table with the
speedup.  Both backends are loaded side by side, so results are also
cross-checked for bitwise equality while we are at it.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--trials N]
"""

import argparse
import time

import numpy as np

from mdplc import _pykernels, domains, solver
from mdplc.grounder import build_graph
from mdplc.parser import parse_domain
from mdplc.refine import refine
from mdplc.rewards import annotate
from mdplc.simulate import _MODE_CODE

try:
    from mdplc import _native
except ImportError:
    _native = None

BACKENDS = {"pure": _pykernels}
if _native is not None:
    BACKENDS["native"] = _native

VI_DOMAINS = ("agv_t2", "gripper_t4", "structure_t1", "structure_t3")
SIM_DOMAINS = ("agv_t1", "gripper_t4", "structure_t3")


def compiled(name):
    d = parse_domain(domains.load(name))
    g = annotate(refine(build_graph(d)), d)
    return d, g


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_value_sweeps(name, repeat):
    d, g = compiled(name)
    flat = solver.build_flat(g)
    goal = solver.label_states(g, d, "doneP")
    gmask = np.zeros(flat.ns, dtype=bool)
    gmask[list(goal)] = True
    sure = solver._prob1e(flat, gmask)
    never = ~solver._reachable_to(flat, gmask)
    x0 = np.zeros(flat.ns)
    x0[sure] = 1.0
    frozen = np.zeros(flat.ns, dtype=np.uint8)
    frozen[sure | never] = 1
    a_rew = np.zeros(flat.na)

    rows = {}
    results = {}
    for label, impl in BACKENDS.items():
        def run():
            x = x0.copy()
            r = impl.value_sweeps(
                x, frozen, False, a_rew,
                flat.sa_off, flat.ae_off, flat.e_dst, flat.e_prob,
                1e-12, 100_000,
            )
            return r, x
        rows[label], results[label] = best_of(run, repeat)
    if len(results) == 2:
        (ra, xa), (rb, xb) = results["pure"], results["native"]
        assert ra == rb and np.array_equal(xa, xb), f"{name}: backend mismatch"
    return flat, rows


def bench_run_trials(name, trials, repeat):
    d, g = compiled(name)
    flat = solver.build_flat(g)
    goal = solver.label_states(g, d, "doneP")
    res = solver.pmax(g, goal)
    pol_slot = solver.policy_slots(g, solver.extract_policy(g, res, goal))
    gmask = np.zeros(flat.ns, dtype=np.uint8)
    gmask[list(goal)] = 1
    max_steps = 10 * flat.ns

    rows = {}
    outcomes = {}
    for label, impl in BACKENDS.items():
        def run():
            counts = np.zeros(flat.na, dtype=np.int64)
            succ = np.zeros(trials, dtype=np.uint8)
            steps = np.zeros(trials, dtype=np.int32)
            got = impl.run_trials(
                trials, max_steps, 7, _MODE_CODE["faulty"], 0.2,
                pol_slot, gmask,
                flat.sa_off, flat.ae_off, flat.e_dst, flat.e_prob,
                counts, succ, steps,
            )
            return got, counts, succ, steps
        rows[label], outcomes[label] = best_of(run, repeat)
    if len(outcomes) == 2:
        ga, *arrs_a = outcomes["pure"]
        gb, *arrs_b = outcomes["native"]
        assert ga == gb and all(
            np.array_equal(a, b) for a, b in zip(arrs_a, arrs_b)
        ), f"{name}: backend mismatch"
    return flat, rows


def print_row(label, size, rows):
    pure = rows["pure"]
    native = rows.get("native")
    if native is not None:
        speed = f"{pure / native:6.1f}x"
        nat = f"{native * 1e3:9.2f}"
    else:
        speed, nat = "   n/a", "      n/a"
    print(f"{label:34s} {size:>12s} {pure * 1e3:9.2f} {nat} {speed}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="best-of repetitions")
    ap.add_argument("--trials", type=int, default=100_000,
                    help="rollouts per simulation benchmark")
    args = ap.parse_args()

    if _native is None:
        print("note: compiled backend not importable, timing pure only\n")
    print(f"{'workload':34s} {'size':>12s} {'pure ms':>9s} {'native ms':>9s} {'speedup':>7s}")
    print("-" * 76)
    for name in VI_DOMAINS:
        flat, rows = bench_value_sweeps(name, args.repeat)
        print_row(f"value_sweeps {name}", f"{flat.ns}s/{flat.ne}e", rows)
    for name in SIM_DOMAINS:
        flat, rows = bench_run_trials(name, args.trials, args.repeat)
        print_row(f"run_trials({args.trials}) {name}", f"{flat.ns}s/{flat.ne}e", rows)


if __name__ == "__main__":
    main()
