"""Acceptance criteria at their stated tolerances and trial counts.

Each test records one summary line; the lines are printed again at the end
of the run.  Every criterion is expected to finish within 60 s.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from kklab.fock import (cross_check, decay_experiment, half_up, level_comm, make_h, min_depth,
                        unit_defect)
from kklab.suites import (DEFAULT_TOL, DELTAS, ETAS, MV_EPS, Outcome, averaging_rows,
                          cdv_rows, close_idempotents_rows, idempotent_trial,
                          inverse_root_pair, optimality_gap, pipeline_rows,
                          projection_commutator, projection_path_lift, roundtrip_rows,
                          trial_rng, w_rows)

TOL = DEFAULT_TOL
SEED = 20240601
BUDGET = 60.0


def stream(suite, i):
    return trial_rng(SEED, suite, i)


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def finish(acceptance, number, name, rows, seconds):
    bad = acceptance(number, name, rows)
    assert not bad, "\n".join(map(str, bad[:10]))
    assert seconds <= BUDGET, f"took {seconds:.1f} s"


def test_idempotent_calculus(acceptance):
    dims = {"n": 8, "N": 3}

    def run():
        rows = []
        for i in range(1000):
            rows += idempotent_trial(stream("idempotent", i), i, dims, TOL)
        return rows

    rows, sec = timed(run)
    finish(acceptance, 1, "idempotent calculus", rows, sec)


def test_gapped_projection_commutator(acceptance):
    def run():
        rows = []
        for i in range(1000):
            rng = stream("matcore", i)
            n = int(rng.integers(2, 9))
            delta = DELTAS[i % len(DELTAS)]
            lhs, rhs = projection_commutator(rng, n, delta)
            rows.append(Outcome("gapped-projection-commutator", f"n={n},delta={delta}",
                                rhs + TOL["slack"], lhs))
        for delta in DELTAS:
            rows.append(Outcome("gapped-projection-optimality", f"delta={delta}", TOL["exact"],
                                optimality_gap(delta)))
        return rows

    rows, sec = timed(run)
    finish(acceptance, 2, "gapped projection commutator", rows, sec)


def test_inverse_root_lipschitz(acceptance):
    def run():
        rows = []
        for i in range(1000):
            rng = stream("matcore", 10_000 + i)
            n = int(rng.integers(1, 9))
            eta = ETAS[i % len(ETAS)]
            lhs, rhs = inverse_root_pair(rng, n, eta)
            rows.append(Outcome("inverse-root-lipschitz", f"n={n},eta={eta}",
                                rhs + TOL["slack"], lhs))
        return rows

    rows, sec = timed(run)
    finish(acceptance, 3, "inverse root lipschitz", rows, sec)


def test_unitary_path_lift(acceptance):
    def run():
        rows = []
        for i in range(200):
            rng = stream("idempotent", 100_000 + i)
            rows += projection_path_lift(rng, int(rng.integers(2, 9)), TOL)
        return rows

    rows, sec = timed(run)
    finish(acceptance, 4, "unitary path lift", rows, sec)


def test_close_idempotent_paths(acceptance):
    def run():
        rows = []
        for i in range(500):
            rng = stream("homotopy", i)
            rows += close_idempotents_rows(rng, int(rng.integers(2, 9)), TOL)
        return rows

    rows, sec = timed(run)
    finish(acceptance, 5, "close idempotent paths", rows, sec)


def test_similarity_homotopy_roundtrip(acceptance):
    def run():
        rows = []
        for i in range(200):
            rng = stream("homotopy", 100_000 + i)
            rows += roundtrip_rows(rng, int(rng.integers(1, 5)), 2, TOL)
        return rows

    rows, sec = timed(run)
    finish(acceptance, 6, "similarity homotopy roundtrip", rows, sec)


def test_boundary_and_exactness(acceptance):
    def run():
        rows = []
        for i in range(200):
            rng = stream("mv", i)
            rows += cdv_rows(rng, int(rng.integers(1, 4)), int(rng.integers(1, 4)), TOL)
            rows += w_rows(rng, TOL, eps=float(rng.choice([0.0, 1e-3, 1e-2, 1e-1])))
        for i in range(8):
            rows += pipeline_rows(stream("mv", 10_000 + i), TOL, MV_EPS, certify=i < 2)
        return rows

    rows, sec = timed(run)
    finish(acceptance, 7, "boundary and exactness", rows, sec)


def test_averaging(acceptance):
    def run():
        rows = []
        for i in range(100):
            rng = stream("averaging", i)
            rows += averaging_rows(rng, 2 + i % 2, int(rng.integers(2, 4)), 2, TOL)
        return rows

    rows, sec = timed(run)
    finish(acceptance, 8, "averaging", rows, sec)


FOCK_K = (4, 8, 16, 32)


def fock_rows():
    rows = []
    for k in FOCK_K:
        L = min_depth(k)
        h0, h1 = make_h(L, k, 0), make_h(L, k, 1)
        rows.append(Outcome("fock-commutator-upper", f"k={k}", 7.0, k * level_comm(h0, L)))
        rows.append(Outcome("fock-commutator-lower", f"k={k}", -5.0, -k * level_comm(h0, L)))
        rows.append(Outcome("fock-unit-defect", f"k={k}", 0.0,
                            float(unit_defect(h0, h1, k + half_up(k), L - 2))))
    table = decay_experiment(2, FOCK_K)
    series = {}
    for r in table:
        if r.quantity.startswith("pinch"):
            series.setdefault(r.quantity, []).append((r.k, r.value))
    for q, pts in sorted(series.items()):
        rise = max((b[1] - a[1] for a, b in zip(pts, pts[1:])), default=0.0)
        rows.append(Outcome("fock-pinch-monotone", q, 0.0, max(rise, 0.0)))
    for k in (2,):
        rows.append(Outcome("fock-route-cross-check", f"L=6,k={k}", 1e-10, cross_check(2, 6, k)))
    return rows


def test_fock_decay(acceptance):
    rows, sec = timed(fock_rows)
    finish(acceptance, 9, "fock decay", rows, sec)


def test_cli_determinism(acceptance, tmp_path):
    def run():
        digests = []
        for name in ("a", "b"):
            out = tmp_path / name
            proc = subprocess.run([sys.executable, "-m", "kklab.cli", "verify", "--seed", "7",
                                   "--out", str(out)], capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            digests.append({f: (out / f).read_bytes() for f in ("report.json", "summary.csv")})
        a, b = digests
        return [Outcome("cli-byte-identical", f, 0.0, 0.0 if a[f] == b[f] else 1.0) for f in a]

    rows, sec = timed(run)
    finish(acceptance, 10, "cli determinism", rows, sec)
