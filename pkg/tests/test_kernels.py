import math
import random
from fractions import Fraction

import numpy as np
import pytest

from mdplc import _pykernels, kernels
from mdplc.model import Atom, Edge, MdpGraph, canonicalize
from mdplc.solver import build_flat

try:
    from mdplc import _native
except ImportError:
    _native = None

needs_native = pytest.mark.skipif(_native is None, reason="extension not built")


class TestRng:
    def test_splitmix64_reference_vector(self):
        # published test vector for seed 0
        s, w = _pykernels.rng_next(0)
        assert w == 0xE220A8397B1DCDAF
        s, w = _pykernels.rng_next(s)
        assert w == 0x6E789E6AA1B965F4
        s, w = _pykernels.rng_next(s)
        assert w == 0x06C45D188009454F

    def test_unit_interval(self):
        assert _pykernels.rng_unit(0) == 0.0
        assert 0.0 < _pykernels.rng_unit((1 << 64) - 1) < 1.0
        s = 12345
        for _ in range(100):
            s, w = _pykernels.rng_next(s)
            assert 0.0 <= _pykernels.rng_unit(w) < 1.0


def random_model(seed: int, max_states: int = 12):
    """Small random refined+annotated graph plus a goal set."""
    rng = random.Random(seed)
    ns = rng.randint(2, max_states)
    states = [canonicalize([Atom("s", (i,))]) for i in range(ns)]
    edges = []
    for si in range(ns):
        for a in range(rng.randint(0, 3)):
            head = Atom(f"a{a}", (si,))
            k = rng.randint(1, 3)
            weights = [rng.randint(1, 5) for _ in range(k)]
            tot = sum(weights)
            for b, w in enumerate(weights):
                edges.append(
                    Edge(
                        si,
                        rng.randrange(ns),
                        head,
                        b,
                        Fraction(w, tot),
                        Fraction(rng.randint(0, 4)),
                    )
                )
    g = MdpGraph(states, edges, refined=True, annotated=True)
    goal = sorted(rng.sample(range(ns), rng.randint(1, max(1, ns // 3))))
    return g, goal


def sweep_inputs(g, goal, minimize):
    flat = build_flat(g)
    x = np.zeros(flat.ns, dtype=np.float64)
    frozen = np.zeros(flat.ns, dtype=np.uint8)
    frozen[goal] = 1
    a_rew = np.zeros(flat.na, dtype=np.float64)
    if flat.ne:
        np.add.at(
            a_rew,
            np.repeat(np.arange(flat.na, dtype=np.int64), np.diff(flat.ae_off)),
            flat.e_prob * flat.e_rew,
        )
    return flat, x, frozen, a_rew


class TestValueSweepsPure:
    def test_frozen_states_never_move(self):
        g, goal = random_model(1)
        flat, x, frozen, a_rew = sweep_inputs(g, goal, False)
        x[goal] = 0.5
        _pykernels.value_sweeps(
            x, frozen, False, a_rew, flat.sa_off, flat.ae_off,
            flat.e_dst, flat.e_prob, 1e-9, 200,
        )
        assert all(x[s] == 0.5 for s in goal)

    def test_actionless_states_never_move(self):
        g = MdpGraph(
            [canonicalize([Atom("s", (i,))]) for i in range(2)],
            [Edge(0, 1, Atom("a", ()), 0, Fraction(1), Fraction(2))],
            refined=True,
            annotated=True,
        )
        flat, x, frozen, a_rew = sweep_inputs(g, [], False)
        x[1] = 7.25
        it, resid = _pykernels.value_sweeps(
            x, frozen, False, a_rew, flat.sa_off, flat.ae_off,
            flat.e_dst, flat.e_prob, 1e-9, 50,
        )
        assert x[1] == 7.25
        assert x[0] == 2.0 + 7.25

    def test_minimize_vs_maximize(self):
        g = MdpGraph(
            [canonicalize([Atom("s", (i,))]) for i in range(2)],
            [
                Edge(0, 1, Atom("a", ()), 0, Fraction(1), Fraction(2)),
                Edge(0, 1, Atom("b", ()), 0, Fraction(1), Fraction(9)),
            ],
            refined=True,
            annotated=True,
        )
        for minimize, want in ((True, 2.0), (False, 9.0)):
            flat, x, frozen, a_rew = sweep_inputs(g, [1], minimize)
            _pykernels.value_sweeps(
                x, frozen, minimize, a_rew, flat.sa_off, flat.ae_off,
                flat.e_dst, flat.e_prob, 1e-9, 50,
            )
            assert x[0] == want

    def test_iteration_cap_reports_nonconvergence(self):
        # divergent: self-loop with reward 1
        g = MdpGraph(
            [canonicalize([Atom("s", (0,))])],
            [Edge(0, 0, Atom("a", ()), 0, Fraction(1), Fraction(1))],
            refined=True,
            annotated=True,
        )
        flat, x, frozen, a_rew = sweep_inputs(g, [], False)
        it, resid = _pykernels.value_sweeps(
            x, frozen, False, a_rew, flat.sa_off, flat.ae_off,
            flat.e_dst, flat.e_prob, 1e-9, 30,
        )
        assert it == 30 and resid > 1e-9
        assert x[0] == 30.0


@needs_native
class TestBackendParity:
    def test_value_sweeps_bitwise(self):
        for seed in range(40):
            g, goal = random_model(seed)
            for minimize in (False, True):
                flat, x1, f1, a_rew = sweep_inputs(g, goal, minimize)
                x2 = x1.copy()
                r1 = _pykernels.value_sweeps(
                    x1, f1, minimize, a_rew, flat.sa_off, flat.ae_off,
                    flat.e_dst, flat.e_prob, 1e-9, 500,
                )
                r2 = _native.value_sweeps(
                    x2, f1.copy(), minimize, a_rew, flat.sa_off, flat.ae_off,
                    flat.e_dst, flat.e_prob, 1e-9, 500,
                )
                assert r1 == r2, f"seed {seed}: iteration/residual mismatch"
                assert np.array_equal(x1, x2), f"seed {seed}: values differ"

    def test_run_trials_bitwise(self):
        for seed in range(30):
            g, goal = random_model(seed + 1000)
            flat = build_flat(g)
            rng = random.Random(seed)
            pol = np.full(flat.ns, -1, dtype=np.int32)
            for si in range(flat.ns):
                slots = list(flat.slots_of(si))
                if slots and rng.random() < 0.9:
                    pol[si] = rng.choice(slots)
            gmask = np.zeros(flat.ns, dtype=np.uint8)
            gmask[goal] = 1
            for mode, param in ((0, 0.0), (1, 0.3), (2, 0.25)):
                outs = []
                for impl in (_pykernels, _native):
                    counts = np.zeros(flat.na, dtype=np.int64)
                    osucc = np.zeros(64, dtype=np.uint8)
                    osteps = np.zeros(64, dtype=np.int32)
                    s, t = impl.run_trials(
                        64, 40, seed * 7 + 3, mode, param, pol, gmask,
                        flat.sa_off, flat.ae_off, flat.e_dst, flat.e_prob,
                        counts, osucc, osteps,
                    )
                    outs.append((s, t, counts.copy(), osucc.copy(), osteps.copy()))
                (s1, t1, c1, su1, st1), (s2, t2, c2, su2, st2) = outs
                assert (s1, t1) == (s2, t2), f"seed {seed} mode {mode}"
                assert np.array_equal(c1, c2)
                assert np.array_equal(su1, su2)
                assert np.array_equal(st1, st2)

    def test_dispatch_module_uses_native_here(self):
        import os

        if os.environ.get("MDPLC_PURE", "") in ("", "0"):
            assert kernels.backend_name() == "native"


class TestDispatch:
    def test_backend_name_valid(self):
        assert kernels.backend_name() in ("native", "pure")

    def test_pure_env_forces_pure_backend(self):
        import subprocess
        import sys

        out = subprocess.run(
            [sys.executable, "-c",
             "from mdplc import kernels; print(kernels.backend_name())"],
            capture_output=True, text=True,
            env={"PATH": "/usr/bin:/bin", "MDPLC_PURE": "1"},
        )
        assert out.stdout.strip() == "pure"
