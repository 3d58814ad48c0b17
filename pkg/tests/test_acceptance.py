"""Acceptance gate: nine behavioral criteria, one PASS/FAIL line each.

Each test prints its verdict through capsys.disabled() so the line shows up
in live output, then asserts. Shared synthetic-benchmark artifacts are
computed once per module.
"""

import re
import time

import numpy as np
import pytest

from rankpool.cli import main
from rankpool.evaluation import accuracy
from rankpool.gradcheck import SUITES
from rankpool.hierarchy import HierarchyConfig, hrp_encode
from rankpool.implicit import HessianFactor, grad_wrt_w
from rankpool.maps import MapKind, l2_normalize, map_forward
from rankpool.pooling import avg_pool, max_pool
from rankpool.solver import SvrConfig, objective_gradient, solve
from rankpool.synth import SynthSpec, direct_inverse, generate, oracle_svr_1d
from rankpool.training import SgdConfig, train_discriminative_rp, train_linear_classifier
from rankpool.types import Dataset

TRAIN_N = 105  # of 150; the last 45 sequences are held out


def verdict(capsys, ok: bool, number: int, detail: str) -> None:
    with capsys.disabled():
        print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    assert ok, f"criterion {number}: {detail}"


@pytest.fixture(scope="module")
def order_benchmark():
    """The three-class frame-order dataset plus classifier accuracies.

    Baseline poolings train on all 150 sequences; the rank-pool
    hierarchies train on the first 105 and hold out the last 45. All
    encodings are length-normalized so classifiers see direction only.
    """
    started = time.monotonic()
    ds = generate(SynthSpec(kind="order-classes", k=3, n=150, d=8,
                            j_min=40, j_max=40, noise=0.1, seed=0))
    labels = np.array(ds.labels())
    cfg = SgdConfig(epochs=60, lr_start=0.01, lr_end=1e-4, momentum=0.9,
                    weight_decay=5e-4, seed=0)

    def encode_all(encoder):
        return l2_normalize(np.vstack([encoder(s) for s in ds.sequences]))

    tables = {
        "avg": encode_all(lambda s: avg_pool(s).values),
        "max": encode_all(lambda s: max_pool(s).values),
    }
    for depth in (1, 2, 3):
        hier = HierarchyConfig(depth=depth, windows=20, strides=1,
                               maps=MapKind.SER)
        tables[f"L{depth}"] = encode_all(lambda s: hrp_encode(s, hier).values)

    results = {}
    for name in ("avg", "max"):
        model = train_linear_classifier(tables[name], labels, ds.class_names,
                                        cfg=cfg).model
        results[name] = {"train": accuracy(model.predict(tables[name]), labels)}
    for name in ("L1", "L2", "L3"):
        enc = tables[name]
        model = train_linear_classifier(enc[:TRAIN_N], labels[:TRAIN_N],
                                        ds.class_names, cfg=cfg).model
        results[name] = {
            "train": accuracy(model.predict(enc[:TRAIN_N]), labels[:TRAIN_N]),
            "heldout": accuracy(model.predict(enc[TRAIN_N:]), labels[TRAIN_N:]),
        }
    results["dataset"] = ds
    results["labels"] = labels
    results["elapsed"] = time.monotonic() - started
    return results


class TestCriterion1:
    def test_solver_matches_oracle_and_is_stationary(self, capsys):
        started = time.monotonic()
        rng = np.random.default_rng(2026)
        worst_gap = 0.0
        for _ in range(50):
            j = int(rng.integers(2, 31))
            c = float(rng.choice([0.1, 1.0, 10.0]))
            eps = float(rng.choice([0.0, 0.1, 0.5]))
            v = rng.normal(size=(j, 1))
            u = solve(v, SvrConfig(c=c, epsilon=eps, tol=1e-10, max_iter=500))[0]
            ref = oracle_svr_1d(v.reshape(-1), c=c, epsilon=eps,
                                lo=-60.0, hi=60.0, step=1e-2, refinements=2)
            assert abs(ref) < 59.0, "oracle bracket hit its edge"
            worst_gap = max(worst_gap, abs(float(u[0]) - ref))
        worst_norm = 0.0
        for _ in range(50):
            j = int(rng.integers(2, 31))
            d = int(rng.integers(1, 9))
            v = rng.normal(size=(j, d))
            cfg = SvrConfig(c=1.0, epsilon=0.1, tol=1e-9, max_iter=500)
            u = solve(v, cfg)[0]
            worst_norm = max(worst_norm,
                             float(np.linalg.norm(objective_gradient(v, u, cfg))))
        elapsed = time.monotonic() - started
        ok = worst_gap <= 1e-3 and worst_norm <= 1e-8 and elapsed < 30.0
        verdict(capsys, ok, 1,
                f"solver vs grid oracle gap {worst_gap:.2e} (<=1e-3), "
                f"solution gradient norm {worst_norm:.2e} (<=1e-8), "
                f"{elapsed:.1f}s")


class TestCriterion2:
    def test_gradcheck_command_passes_every_suite(self, capsys):
        started = time.monotonic()
        code = main(["gradcheck", "--trials", "20", "--seed", "0"])
        lines = [ln for ln in capsys.readouterr().out.splitlines() if ln.strip()]
        elapsed = time.monotonic() - started
        assert code == 0
        assert len(lines) == len(SUITES)
        summary = []
        ok = elapsed < 120.0
        for line in lines:
            m = re.match(r"(\w+): (pass|FAIL) max_rel_err=([\d.e+-]+) "
                         r"threshold=([\d.e+-]+) trials=(\d+) skipped=(\d+)", line)
            assert m, f"unexpected report line: {line}"
            name, status, err, threshold, trials, skipped = m.groups()
            ok = ok and status == "pass" and float(err) < float(threshold)
            ok = ok and int(skipped) < 0.2 * int(trials)
            summary.append(f"{name} {float(err):.1e}/{int(skipped)}skip")
        verdict(capsys, ok, 2,
                "gradcheck suites (max_rel_err/skips): "
                + ", ".join(summary) + f", {elapsed:.1f}s")


class TestCriterion3:
    def test_update_chain_tracks_direct_inverse(self, capsys):
        started = time.monotonic()
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(30):
            d = int(rng.integers(2, 65))
            n = int(rng.integers(1, 201))
            rows = rng.normal(size=(n, d))
            chain = HessianFactor(rows, np.ones(n, dtype=bool), c=1.0,
                                  mode="sherman-morrison")
            dense = np.eye(d) + rows.T @ rows
            gap = float(np.linalg.norm(chain.inverse_matrix()
                                       - direct_inverse(dense)))
            worst = max(worst, gap)
        elapsed = time.monotonic() - started
        ok = worst < 1e-8 and elapsed < 30.0
        verdict(capsys, ok, 3,
                f"30 update chains (D<=64, <=200 updates) vs elimination, "
                f"worst Frobenius gap {worst:.2e} (<1e-8), {elapsed:.1f}s")


class TestCriterion4:
    def test_diagonal_equals_full_in_one_dimension(self, capsys):
        rng = np.random.default_rng(11)
        cfg = SvrConfig(c=1.0, epsilon=0.1, tol=1e-12, max_iter=200)
        worst = 0.0
        for _ in range(20):
            j = int(rng.integers(3, 25))
            x = rng.normal(size=(j, 1))
            w = np.array([[float(rng.uniform(0.5, 2.0))]])
            u = solve(x @ w.T, cfg)[0]
            g = rng.normal(size=1)
            full = grad_wrt_w(x, w, u, g, MapKind.IDENTITY, cfg, mode="full")
            diag = grad_wrt_w(x, w, u, g, MapKind.IDENTITY, cfg, mode="diagonal")
            worst = max(worst, float(np.abs(full - diag).max()))
        ok = worst <= 1e-10
        verdict(capsys, ok, 4,
                f"diagonal vs full transform gradient at D=1, "
                f"worst gap {worst:.2e} (<=1e-10)")


class TestCriterion5:
    def test_order_blind_baselines_and_order_aware_hierarchy(self, capsys,
                                                             order_benchmark):
        r = order_benchmark
        ok = (r["avg"]["train"] <= 0.45 and r["max"]["train"] <= 0.45
              and r["L2"]["train"] >= 0.90 and r["L2"]["heldout"] >= 0.80
              and r["elapsed"] < 180.0)
        verdict(capsys, ok, 5,
                f"frame-order classes: avg {r['avg']['train']:.4f} / "
                f"max {r['max']['train']:.4f} train (<=0.45); "
                f"depth-2 hierarchy {r['L2']['train']:.4f} train (>=0.90), "
                f"{r['L2']['heldout']:.4f} held out (>=0.80), "
                f"{r['elapsed']:.1f}s")


class TestCriterion6:
    def test_depth_two_beats_flat_encoding(self, capsys, order_benchmark):
        r = order_benchmark
        gap32 = r["L3"]["heldout"] - r["L2"]["heldout"]
        ok = r["L2"]["heldout"] >= r["L1"]["heldout"]
        verdict(capsys, ok, 6,
                f"held-out by depth: L1 {r['L1']['heldout']:.4f} <= "
                f"L2 {r['L2']['heldout']:.4f}; "
                f"L3 {r['L3']['heldout']:.4f} (L3-L2 gap {gap32:+.4f}, reported only)")


class TestCriterion7:
    def test_joint_training_helps_across_seeds(self, capsys, order_benchmark):
        started = time.monotonic()
        ds = order_benchmark["dataset"]
        labels = order_benchmark["labels"]
        train_ds = Dataset(sequences=list(ds.sequences[:TRAIN_N]),
                           class_names=ds.class_names)
        held = ds.sequences[TRAIN_N:]
        held_labels = labels[TRAIN_N:]

        def heldout_accuracy(model):
            enc = np.vstack([model.encode_sequence(s) for s in held])
            return accuracy(model.predict(enc), held_labels)

        wins = 0
        decreasing = True
        first_losses, last_losses = [], []
        for seed in range(10):
            cfg = SgdConfig(epochs=30, seed=seed)
            joint = train_discriminative_rp(train_ds, cfg=cfg)
            frozen = train_discriminative_rp(train_ds, cfg=cfg, learn_w=False)
            decreasing = decreasing and (joint.loss_history[-1]
                                         < joint.loss_history[0])
            first_losses.append(joint.loss_history[0])
            last_losses.append(joint.loss_history[-1])
            if heldout_accuracy(joint.model) >= heldout_accuracy(frozen.model):
                wins += 1
        elapsed = time.monotonic() - started
        ok = decreasing and wins >= 8 and elapsed < 300.0
        verdict(capsys, ok, 7,
                f"joint vs frozen transform: {wins}/10 seeds >= (need 8), "
                f"cross-entropy fell on every seed "
                f"(mean {np.mean(first_losses):.3f} -> {np.mean(last_losses):.3f}), "
                f"{elapsed:.1f}s")


class TestCriterion8:
    def test_sign_split_root_identities_hold_exactly(self, capsys):
        """Inputs are drawn as signed squares, on which the root and its
        square are both exact in binary floating point."""
        rng = np.random.default_rng(13)
        base = rng.normal(size=(1000, 16))
        signs = rng.choice([-1.0, 1.0], size=base.shape)
        x = signs * base * base
        y = map_forward(MapKind.SER, x)
        pos, neg = y[:, :16], y[:, 16:]
        ok = (bool(np.all(y >= 0.0))
              and y.shape == (1000, 32)
              and bool(np.array_equal(pos * pos - neg * neg, x)))
        verdict(capsys, ok, 8,
                "sign-split root on 1000 random vectors: nonnegative, "
                "width doubled, squares difference reconstructs the input "
                "bit for bit")


class TestCriterion9:
    def run_pipeline(self, root, capsys):
        root.mkdir()
        ds = root / "ds.jsonl"
        enc = root / "ds.enc"
        model = root / "model.txt"
        preds = root / "preds.csv"
        assert main(["synth", "--kind", "order-classes", "--k", "3", "--n", "24",
                     "--d", "4", "--j-min", "16", "--j-max", "16",
                     "--noise", "0.1", "--seed", "5", "-o", str(ds)]) == 0
        assert main(["encode", "-i", str(ds), "-o", str(enc), "--method", "hrp",
                     "--window", "8", "--depth", "2", "--map", "ser",
                     "--jobs", "1"]) == 0
        assert main(["train", "--mode", "linear", "-i", str(enc),
                     "-o", str(model), "--epochs", "8", "--seed", "0"]) == 0
        capsys.readouterr()
        assert main(["eval", "-m", str(model), "--encodings", str(enc),
                     "--kv"]) == 0
        eval_out = capsys.readouterr().out
        assert main(["predict", "-m", str(model), "--encodings", str(enc),
                     "-o", str(preds)]) == 0
        return {"ds": ds.read_bytes(), "enc": enc.read_bytes(),
                "model": model.read_bytes(), "preds": preds.read_bytes(),
                "eval": eval_out}

    def test_pipeline_is_byte_reproducible(self, capsys, tmp_path):
        first = self.run_pipeline(tmp_path / "run_a", capsys)
        second = self.run_pipeline(tmp_path / "run_b", capsys)
        same = {key: first[key] == second[key] for key in first}
        ok = all(same.values())
        verdict(capsys, ok, 9,
                "synth/encode/train/eval/predict repeated with fixed seeds: "
                + ", ".join(f"{k} {'identical' if v else 'DIFFERS'}"
                            for k, v in same.items()))
