"""Acceptance criteria, one test per criterion, each at its stated tolerance."""
import math
import subprocess
import sys

import numpy as np

from copsonlab.aux_weights import MasterCheckInput, verify_certificate, verify_master
from copsonlab.evaluator import battery_length, eval_inequality, run_battery
from copsonlab.params import Params
from copsonlab.scalar_core import check_condition, cond_26, scalar_eval, solve_c0
from copsonlab.sequences import materialize, parse_spec, weights_from_spec
from copsonlab.sharpness import norm_estimate, ratio_scan

CLI = [sys.executable, "-m", "copsonlab.cli"]


def _cert(scheme, params, lam_text, N):
    spec = parse_spec(lam_text)
    return verify_certificate(scheme, params, weights_from_spec(spec, battery_length(spec, N)))


def test_c0_closed_forms(criterion):
    d2 = abs(solve_c0(2.0) - (2.0 - math.sqrt(5.0)))
    dh = abs(solve_c0(0.5) - (3.0 - math.sqrt(5.0)) / 4.0)
    ok = d2 < 1e-12 and dh < 1e-12
    assert criterion(1, ok, f"|c0(2) - (2 - sqrt5)| = {d2:.1e}, |c0(1/2) - (3 - sqrt5)/4| = {dh:.1e}")


def test_definition_consistency(criterion):
    worst = max(abs(cond_26(p, solve_c0(p))) for p in (1.1, 1.5, 2.0, 3.0, 5.0, 10.0))
    assert criterion(2, worst < 1e-10, f"max |cond_26(p, c0(p))| = {worst:.1e}")


def test_lemma_endpoint_principle(criterion):
    rng = np.random.default_rng(2024)
    disagree = []
    for _ in range(50):
        p = 10.0 - 9.0 * rng.random()          # (1, 10]
        c = -5.0 + 5.0 * rng.random()          # [-5, 0)
        pr = Params(p, c=c)
        grid = check_condition("LEMMA21", pr, 4096, 1e-12).verdict == "PASS"
        endpoint = scalar_eval("F_LEMMA", pr, 1.0) >= -1e-12
        if grid != endpoint:
            disagree.append((p, c))
    assert criterion(3, not disagree, f"{len(disagree)} disagreements over 50 seeded (p, c)")


def test_extended_copson_end_to_end(criterion):
    bad = []
    for p in (1.5, 2.0, 3.0):
        c0 = solve_c0(p)
        for c in (c0, c0 / 2.0, 0.0):
            pr = Params(p, c=c)
            for lt in ("const:1", "geom:1/2", "pow:-2"):
                if _cert("COPSON_TAIL", pr, lt, 10000).verdict != "CERT_PASS":
                    bad.append(("COPSON_TAIL", p, c, lt))
                if lt != "const:1" and _cert("LEINDLER", pr, lt, 10000).verdict != "CERT_PASS":
                    bad.append(("LEINDLER", p, c, lt))
            for fam in ("C2", "L1"):
                for lt, xt, rep in run_battery(fam, pr, 10000):
                    if rep.verdict != "HOLDS":
                        bad.append((fam, p, c, lt, xt, rep.verdict))
    assert criterion(4, not bad, f"{len(bad)} failing certificate or battery runs" + (f": {bad[:3]}" if bad else ""))


def test_reverse_case(criterion):
    bad = []
    for c in (0.0, 0.1):
        for lt, xt, rep in run_battery("C2", Params(0.5, c=c, reverse=True), 10000):
            if rep.verdict != "HOLDS":
                bad.append((c, lt, xt, rep.verdict))
    assert criterion(5, not bad, f"reversed C2 at p = 1/2: {len(bad)} battery runs not HOLDS")


def test_bg_certificate_chain(criterion):
    bad = []
    for p, a in ((2.0, 0.75), (2.0, 0.8), (3.0, 0.9)):
        for lt in ("const:1", "pow:-2"):
            if _cert("BG", Params(p, alpha=a), lt, 10000).verdict != "CERT_PASS":
                bad.append((p, a, lt))
    cert = _cert("BG", Params(2.0, alpha=0.5), "const:1", 100)
    r1 = float(cert.residuals[0])
    ok = not bad and abs(r1 - (-0.5)) < 1e-12
    assert criterion(6, ok, f"{len(bad)} BG certificate failures; residual at n=1 for alpha=0.5 is {r1!r}")


def test_bga_analogue(criterion):
    bad = []
    for p in (1.5, 2.0):
        for a in (0.25, 0.5, 1.0, 2.0):
            pr = Params(p, alpha=a)
            for lt, xt, rep in run_battery("BGA", pr, 10000):
                if rep.verdict != "HOLDS":
                    bad.append(("eval", p, a, lt, xt))
            if a >= 1.0:
                for lt in ("geom:1/2", "pow:-2"):
                    if _cert("BGA", pr, lt, 10000).verdict != "CERT_PASS":
                        bad.append(("cert", p, a, lt))
    assert criterion(7, not bad, f"{len(bad)} BGA evaluation or certificate failures")


def test_sharpness_scan(criterion):
    scan = ratio_scan("C1", Params(2.0, c=2.0), [1.0, 0.5, 0.2, 0.1, 0.05], 10**6)
    tail = [e.ratio for e in scan.entries[1:]]
    increasing = all(b > a for a, b in zip(tail, tail[1:]))
    below = all(r < 4.0 for r in tail)
    r1 = scan.entries[0].ratio
    at_220 = abs(r1 - 2.20) <= 0.01
    ok = increasing and below and at_220
    detail = (f"increasing={increasing} below_4={below} R(0.5..0.05)={[round(r, 5) for r in tail]} "
              f"R(1)={r1:.6f} (stated 2.20 +- 0.01; closed form 17 pi^2/60 = {17 * math.pi ** 2 / 60:.6f})")
    assert criterion(8, ok, detail)


def test_norm_oracle(criterion):
    pr = Params(2.0, c=0.0)
    est = {N: norm_estimate("C2_DUAL", pr, weights_from_spec(parse_spec("const:1"), N)).value
           for N in (2, 10, 100)}
    oracle = math.sqrt((1.5 + math.sqrt(1.25)) / 2.0)
    ok = (abs(est[2] - 1.144123) <= 1e-6 and abs(est[2] - oracle) < 1e-12
          and est[2] < est[10] < est[100] < 2.0)
    assert criterion(9, ok, f"estimates {est}, 2x2 oracle {oracle:.12f}")


def test_master_property(criterion):
    rng = np.random.default_rng(22)
    worst = math.inf
    for _ in range(100):
        p = 1.0 + 4.0 * rng.random()
        a, b, w, x = (rng.lognormal(0.0, 1.0, 20) for _ in range(4))
        rep = verify_master("M22", MasterCheckInput(a, b, w, x, p))
        worst = min(worst, rep.residual)
    assert criterion(10, worst >= -1e-10, f"worst M22 residual over 100 seeded inputs = {worst!r}")


def test_evaluator_micro_oracles(criterion):
    def run(fam, pr, lt, xt, N):
        lam = weights_from_spec(parse_spec(lt), N)
        return eval_inequality(fam, pr, lam, materialize(parse_spec(xt), N))

    r1 = run("C2", Params(2.0, c=0.0), "const:1", "unit:1", 10)
    ok1 = (r1.lhs, r1.constant, r1.rhs_sum, r1.ratio, r1.verdict) == (1.0, 4.0, 1.0, 0.25, "HOLDS")

    r2 = run("C1", Params(2.0, c=2.0), "const:1", "unit:1", 1000)
    partial = math.fsum(n ** -2.0 for n in range(1, 1001))
    basel_gap = math.pi ** 2 / 6.0 - r2.lhs
    ok2 = (abs(r2.lhs - partial) <= 1e-12 and 1.0 / 1001 <= basel_gap <= 1.0 / 1000
           and basel_gap <= 1e-3 and r2.rhs == 4.0 and r2.verdict == "HOLDS")

    r3 = run("BG", Params(2.0, alpha=1.0), "const:1", "unit:1", 10)
    ok3 = (r3.lhs, r3.constant, r3.rhs_sum, r3.verdict) == (1.0, 9.0, 1.0, "HOLDS") and r3.ratio == 1.0 / 9.0

    r4 = run("C2", Params(0.5, c=0.0, reverse=True), "const:1", "unit:1", 10)
    ok4 = (r4.lhs == 1.0 and abs(r4.rhs - math.sqrt(0.5)) < 1e-15
           and r4.margin == r4.lhs - r4.rhs and r4.verdict == "HOLDS")
    flags = [ok1, ok2, ok3, ok4]
    assert criterion(11, all(flags), f"examples reproduced: {flags}")


def _cli(*args):
    return subprocess.run(CLI + list(args), capture_output=True, check=False).stdout


def test_determinism_across_jobs(criterion):
    region = ["region", "--mode", "pc", "--p-range", "1.5:3:0.5", "--second-range", "-0.4:0.4:0.2",
              "--N", "2000"]
    search = ["search", "--family", "C1", "--p", "2", "--c", "2", "--lambda", "const:1",
              "--N", "200", "--budget", "4096", "--seed", "7"]
    same = []
    for cmd in (region, search):
        a, b = _cli(*cmd, "--jobs", "1"), _cli(*cmd, "--jobs", "8")
        same.append(bool(a) and a == b)
    assert criterion(12, all(same), f"byte-identical region={same[0]} search={same[1]}")
