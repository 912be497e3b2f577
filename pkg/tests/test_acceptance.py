"""Acceptance criteria, each run at its stated tolerance and timed against its budget.

Every criterion prints one PASS/FAIL line (collected into the pytest terminal
summary, or printed directly when the file is run as a script).
"""

import sys
import time
from pathlib import Path

import numpy as np
import pytest

from selftesting import chsh, cli, clifford, games, schur
from selftesting import dilation as dl
from selftesting import matcore as mc
from selftesting import models as md

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
RESULTS = []


def record(number, title, budget, body):
    """Run ``body`` (returning (ok, detail)), time it and log one line."""
    start = time.perf_counter()
    ok, detail = body()
    elapsed = time.perf_counter() - start
    passed = bool(ok) and elapsed < budget
    line = f"AC{number} {'PASS' if passed else 'FAIL'} {title}: {detail}; {elapsed:.3f} s (budget {budget} s)"
    RESULTS.append(line)
    print(line)
    return passed, line


def criterion_1():
    def body():
        report, code, _ = cli.run_argv(["chsh", "score", str(FIXTURES / "ideal.json")], mc.DEFAULT_TOL)
        win_gap = abs(report["winProb"] - (0.5 + 1 / (2 * np.sqrt(2))))
        bias_gap = abs(report["bias"] - 2 * np.sqrt(2))
        return code == 0 and win_gap <= 1e-12 and bias_gap <= 1e-12, f"winProb gap {win_gap:.1e}, bias gap {bias_gap:.1e}"

    return record(1, "CHSH value", 0.1, body)


def criterion_2():
    def body():
        worst = 0.0
        ok = True
        ideal = chsh.ideal_model()
        models = [ideal]
        rng = np.random.default_rng(2024)
        for _ in range(20):
            models.append(md.conjugate(ideal, mc.random_unitary(rng, 2), mc.random_unitary(rng, 2)))
        for ka in range(1, 4):
            for kb in range(1, 4):
                aux = mc.random_unit_vector(rng, ka * kb)  # generically entangled
                amp = dl.ampliate(ideal, ka, kb, aux)
                models.append(md.conjugate(amp, mc.random_unitary(rng, 2 * ka), mc.random_unitary(rng, 2 * kb)))
        for m in models:
            rep = chsh.swap_selftest(m)
            pairs = {k: v for k, v in rep.residuals.items() if k != "state"}
            ok &= rep.verdict and len(pairs) == 16
            worst = max(worst, max(pairs.values()), rep.residuals["state"])
        return ok and worst <= 1e-8, f"{len(models)} models, worst generator residual {worst:.1e}"

    return record(2, "CHSH self-test", 2.0, body)


def criterion_3():
    def body():
        _, rep = chsh.counterexample_som()
        som_ok = all(v["ok"] for v in rep.som_residuals.values())
        _, _, a, ap, _, _ = rep.obstruction_pair
        ok = som_ok and rep.qns_diagonal_residual <= 1e-10 and rep.obstruction_norm > 0.1 and a != ap
        return ok, f"QNS diagonal residual {rep.qns_diagonal_residual:.1e}, obstruction {rep.obstruction_norm:.3f} at a={a}, a'={ap}"

    return record(3, "SOM counterexample", 1.0, body)


def criterion_4():
    def body():
        w2 = 2 * np.eye(4) - np.kron(mc.SIGMA_X, mc.SIGMA_X) - np.kron(mc.SIGMA_Z, mc.SIGMA_Z)
        same = mc.fro(w2 - clifford.witness_operator(2))
        dim2, basis2, lam2 = clifford.witness_kernel(2)
        overlap = abs(np.vdot(basis2[:, 0], mc.max_entangled(2))) if dim2 == 1 else 0.0
        dim4, _, lam4 = clifford.witness_kernel(4)
        ok = same == 0 and lam2 >= -1e-12 and lam4 >= -1e-12 and dim2 == 1 and dim4 == 1 and abs(overlap - 1) <= 1e-12
        return ok, f"n=2 kernel {dim2} (|<k, Omega>| = {overlap:.15f}, min eig {lam2:.1e}); n=4 kernel {dim4}"

    return record(4, "Clifford witness", 1.0, body)


def criterion_5():
    def body():
        worst = 0.0
        for n in (2, 4):
            ok_n, res = clifford.check_AC(clifford.canonical_moments(n), n, 1e-12)
            worst = max(worst, max(res.values()))
        model = clifford.independent_commuting_model()
        words = clifford.ac_words(2)
        mm = clifford.moment_matrix(md.correlation_ns(model), words, clifford.model_completion(model, words))
        _, res = clifford.check_AC(mm, 2)
        # check_AC reports |m_ee - m_ww - 1/8|, and the commuting model has m_ee - m_ww = 0
        viol = max(abs(v - 0.125) for v in res.values())
        return worst <= 1e-12 and viol <= 1e-12, f"canonical residual {worst:.1e}; independent model off by 1/8 within {viol:.1e}"

    return record(5, "A_C membership", 1.0, body)


def criterion_6():
    def body():
        v = games.verify_perfect(games.gamma_correlation(games.pauli_hom_model()), tol=1e-12)
        rng = np.random.default_rng(6)
        worst = 0.0
        ok = v.ok
        for i in range(20):
            k = 1 + i % 3
            pf = games.extract_pauli_form(games.random_pauli_model(rng, k), seed=i)
            ok &= pf.ok and pf.n_dim == k
            worst = max(worst, max(pf.residuals.values()))
        return ok and worst <= 1e-7, f"perfect residual {max(v.residuals.values()):.1e}; 20 extractions, worst residual {worst:.1e}"

    return record(6, "Graph coloring", 5.0, body)


def criterion_7():
    def body():
        rng = np.random.default_rng(7)
        unit = rec = 0.0
        for i in range(50):
            n = 1 + i % 3
            h = 1 + (i // 3) % 3
            d = dl.usom_dilate(dl.random_som(rng, n, n, h))
            unit = max(unit, d.unitarity_residual)
            rec = max(rec, d.reconstruction_residual)
        return unit <= 1e-9 and rec <= 1e-9, f"50 SOMs, unitarity {unit:.1e}, reconstruction {rec:.1e}"

    return record(7, "USOM dilation", 5.0, body)


def criterion_8():
    def body():
        pi = schur.s3_irrep()
        psi = schur.rotated_psi(np.pi / 3, 0.5, np.sqrt(3) / 2)
        data = schur.schur_channel(pi, pi, psi)
        chan = max(data.residuals.values())
        h = schur.selftest_hypotheses(pi, pi, psi)
        h_deg = schur.selftest_hypotheses(pi, pi, schur.rotated_psi(np.pi / 2, 0.5, np.sqrt(3) / 2))
        worst = 0.0
        ok = chan <= 1e-10 and h.marginally_cyclic and h.extremality_rank == 16 and h_deg.extremality_rank < 16
        for seed in range(5):
            w = np.random.default_rng(seed).dirichlet([1, 1])
            m = schur.multiplicity_model(pi, pi, psi, w, np.random.default_rng(50 + seed))
            rep = schur.schur_dilation(m, (pi, pi, psi))
            ok &= rep.verdict
            worst = max(worst, rep.worst_residual)
        detail = (
            f"channel residual {chan:.1e}, rank {h.extremality_rank} (theta=pi/2: {h_deg.extremality_rank}); "
            f"5 conjugated multiplicity-2 self-tests, worst residual {worst:.1e}"
        )
        return ok and worst <= 1e-8, detail

    return record(8, "Schur S3", 3.0, body)


def criterion_9():
    def body():
        rng = np.random.default_rng(9)
        red = 0.0
        for _ in range(20):
            m = md.random_commuting_model(rng, [(2, 2), (1, 2)], schmidt_rank=1, weights=rng.dirichlet([1, 1]))
            sd = md.support_data(m)
            red = max(red, float(np.max(np.abs(md.correlation_ns(m).table - md.correlation_ns(sd.reduced).table))))
        wsum = reas = 0.0
        for _ in range(20):
            m = md.random_commuting_model(rng, [(2, 1), (1, 2), (2, 2)], weights=rng.dirichlet([1, 1, 1]))
            parts = md.split_commuting(m)
            wsum = max(wsum, abs(sum(w for w, _ in parts) - 1))
            mix = sum(w * md.correlation_ns(p).table for w, p in parts)
            reas = max(reas, float(np.max(np.abs(mix - md.correlation_ns(m).table))))
        alg = 0.0
        for _ in range(50):
            n, k = rng.integers(1, 5, size=2)
            b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            p = mc.dag(b) @ b
            g = mc.gram_factor(p)
            alg = max(alg, mc.fro(mc.dag(g) @ g - p) / mc.fro(p))
            a, c = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)) for _ in range(2))
            d, e = (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k)) for _ in range(2))
            lhs = mc.kron(a, d) @ mc.kron(c, e)
            alg = max(alg, mc.fro(lhs - mc.kron(a @ c, d @ e)) / mc.fro(lhs))
            big = mc.kron(a, d)
            alg = max(alg, mc.fro(mc.partial_trace(big, (n, k), "B") - np.trace(d) * a) / mc.fro(big))
            alg = max(alg, mc.fro(mc.partial_trace(big, (n, k), "A") - np.trace(a) * d) / mc.fro(big))
        ok = red <= 1e-9 and wsum <= 1e-9 and reas <= 1e-9 and alg <= 1e-12
        return ok, f"reduced {red:.1e}, weight sum {wsum:.1e}, reassembly {reas:.1e}, algebraic identities {alg:.1e}"

    return record(9, "Property suites", 5.0, body)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"AC{i}" for i in range(1, 10)])
def test_acceptance(criterion):
    passed, line = criterion()
    assert passed, line


if __name__ == "__main__":
    outcomes = [c()[0] for c in CRITERIA]
    sys.exit(0 if all(outcomes) else 1)
