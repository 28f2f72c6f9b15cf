"""Release gate: one test per acceptance criterion, run with pytest -v.

Criteria tied to the citation datasets need cora/citeseer files under
data/<name>/; scripts/fetch_datasets.py downloads them on a machine with
network access. Without the files those tests skip with that instruction,
and a synthetic twin asserting the same trend runs unconditionally next to
each one. No test here imports the extraction tool: the whole primary suite
stands on its own, which is itself part of the contract.
"""

import subprocess
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

import gnnattack.tensor as T
from gnnattack.decision import (
    AttackBudget,
    attack_report,
    project_norm,
    row_norms,
    topk_pgd_attack,
)
from gnnattack.graphdata import (
    SplitConfig,
    build_graph_from_embeddings,
    load_planetoid,
    read_feature_file,
    read_label_file,
    write_feature_file,
)
from gnnattack.harness import cmd_plot, cmd_sweep, parse_config
from gnnattack.models import (
    TrainConfig,
    _live_forward,
    evaluate_split,
    init_params,
    prepare_structure,
    train,
)
from gnnattack.poison import (
    PoisonConfig,
    gcl_dis_loss,
    gcl_poison,
    gcl_sim_loss,
    mean_shift_poison,
    poison_retrain_evaluate,
)
from gnnattack.synthetic import SyntheticSpec, clustered_dataset

from conftest import make_graph
from oracles import (
    brute_force_edges,
    central_diff_grad,
    loop_gcl_dis,
    loop_gcl_sim,
    rel_err,
)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
REPO_ROOT = Path(__file__).resolve().parent.parent


def planetoid_or_skip(name: str):
    content = DATA_DIR / name / f"{name}.content"
    cites = DATA_DIR / name / f"{name}.cites"
    if not content.exists() or not cites.exists():
        pytest.skip(
            f"{name} citation files not found at {content} / {cites}; run "
            "scripts/fetch_datasets.py on a machine with network access and "
            "copy the files there")
    return load_planetoid(content, cites, name=name)


def standard_split(ds, per_class: int = 20, n_val: int = 500, n_test: int = 1000):
    """Conventional citation-benchmark split: the first 20 nodes of each class
    in file order train, the next 500 nodes validate, the last 1000 test."""
    train_mask = np.zeros(ds.n, dtype=bool)
    taken = {c: 0 for c in range(ds.num_classes)}
    for i, label in enumerate(ds.labels):
        if taken[int(label)] < per_class:
            train_mask[i] = True
            taken[int(label)] += 1
    val_mask = np.zeros(ds.n, dtype=bool)
    budget = n_val
    for i in range(ds.n):
        if budget == 0:
            break
        if not train_mask[i]:
            val_mask[i] = True
            budget -= 1
    test_mask = np.zeros(ds.n, dtype=bool)
    budget = n_test
    for i in range(ds.n - 1, -1, -1):
        if budget == 0:
            break
        if not train_mask[i] and not val_mask[i]:
            test_mask[i] = True
            budget -= 1
    return replace(ds, train_mask=train_mask, val_mask=val_mask, test_mask=test_mask)


# Shared synthetic twin: three noisy clusters whose similarity graph a small
# model fits imperfectly, leaving visible headroom for every attack trend.
TWIN_TRAIN = TrainConfig(epochs=100, patience=20, hidden_dims=(16, 8), seed=0)


@pytest.fixture(scope="module")
def twin():
    spec = SyntheticSpec(num_classes=3, per_class=15, dim=96, noise=0.3,
                         threshold=0.75, seed=2)
    ds = clustered_dataset(spec, split=SplitConfig(train_frac=0.2, val_frac=0.2,
                                                   seed=1))
    params, _ = train("gcn", ds, TWIN_TRAIN)
    structure = prepare_structure("gcn", ds)
    clean = evaluate_split(params, ds, "test", structure=structure)
    return ds, params, structure, clean


# ---------------------------------------------------------------- criterion 1


def test_criterion_01_gradients_match_finite_differences():
    """20 random 6-node instances, both models: analytic grads of the masked
    cross-entropy w.r.t. features and every parameter, rel err < 1e-5, < 30 s."""
    started = time.perf_counter()
    rng = np.random.default_rng(99)
    for i in range(20):
        kind = "gcn" if i % 2 == 0 else "gat"
        ds = make_graph(n=6, d=4, classes=3, edge_prob=0.5, seed=100 + i)
        structure = prepare_structure(kind, ds)
        params = init_params(kind, ds.num_features, ds.num_classes, (5, 3),
                             rng=rng)
        arrays = params.arrays()

        def loss_of(arrs, x):
            tensors = [T.Tensor.param(a) for a in arrs]
            live = _live_forward(kind, tensors, structure)
            xt = T.Tensor.param(x)
            loss = T.cross_entropy(live(xt, training=False, rate=0.0, rng=None),
                                   ds.labels, ds.train_mask)
            return loss, tensors, xt

        loss, tensors, xt = loss_of(arrays, ds.features)
        grads = T.backward(loss)

        fd_x = central_diff_grad(
            lambda x: loss_of(arrays, x)[0].item(), ds.features, h=1e-5)
        assert rel_err(grads[xt], fd_x) < 1e-5
        for j, tensor in enumerate(tensors):
            def at(a, j=j):
                swapped = arrays[:j] + [a] + arrays[j + 1:]
                return loss_of(swapped, ds.features)[0].item()

            fd = central_diff_grad(at, arrays[j], h=1e-5)
            assert rel_err(grads[tensor], fd) < 1e-5, f"instance {i} array {j}"
    assert time.perf_counter() - started < 30.0


# ---------------------------------------------------------------- criterion 2


def test_criterion_02_projection_invariant_holds_in_bulk():
    rng = np.random.default_rng(7)
    eps = 0.8
    vectors = rng.uniform(-1.0, 1.0, size=(10_000, 7))
    vectors *= rng.uniform(0.0, 3.0, size=(10_000, 1))  # straddle the ball
    for p in (1.0, 2.0, np.inf):
        projected = np.stack([project_norm(v, p, eps) for v in vectors])
        assert (row_norms(projected, p) <= eps * (1 + 1e-9)).all()
        inside = row_norms(vectors, p) <= eps
        assert inside.any() and (~inside).any()
        assert np.array_equal(projected[inside], vectors[inside])
        twice = np.stack([project_norm(v, p, eps) for v in projected])
        assert np.abs(twice - projected).max() <= 1e-12


# ---------------------------------------------------------------- criterion 3


def test_criterion_03_eps_zero_attack_is_bitwise_identity(twin):
    ds, params, structure, _ = twin
    budget = AttackBudget(norm="linf", eps=0.0, iterations=40)
    x_prime, pert = topk_pgd_attack(params, ds, budget, structure=structure)
    assert x_prime.tobytes() == ds.features.tobytes()
    assert not pert.delta.any()


# ---------------------------------------------------------------- criterion 4


@pytest.mark.parametrize("name,floor", [("cora", 0.75), ("citeseer", 0.60)])
def test_criterion_04_clean_training_reaches_floor(name, floor):
    ds = standard_split(planetoid_or_skip(name))
    started = time.perf_counter()
    params, _ = train("gcn", ds, TrainConfig(seed=0))
    elapsed = time.perf_counter() - started
    report = evaluate_split(params, ds, "test")
    assert report.accuracy >= floor, f"{name} test accuracy {report.accuracy:.4f}"
    assert elapsed < 120.0, f"{name} training took {elapsed:.1f}s"


def test_criterion_04_synthetic_twin_learns(twin):
    _, _, _, clean = twin
    assert clean.accuracy >= 0.6


# ---------------------------------------------------------------- criterion 5


def _norm_severity_means(ds, train_cfg, seeds, eps):
    structure = prepare_structure("gcn", ds)
    means = {}
    for norm in ("l1", "l2", "linf"):
        accs = []
        for seed in seeds:
            params, _ = train("gcn", ds, replace(train_cfg, seed=seed),
                              structure=structure)
            budget = AttackBudget(norm=norm, eps=eps, iterations=40)
            x_prime, _ = topk_pgd_attack(params, ds, budget, structure=structure)
            accs.append(attack_report(params, ds, x_prime,
                                      structure=structure).accuracy)
        means[norm] = float(np.mean(accs))
    return means


def test_criterion_05_norm_severity_ordering_on_cora():
    ds = standard_split(planetoid_or_skip("cora"))
    means = _norm_severity_means(ds, TrainConfig(), seeds=range(5), eps=0.1)
    assert means["l1"] > means["l2"] > means["linf"], means
    assert means["linf"] < 0.10, means


def test_criterion_05_synthetic_twin_ordering():
    spec = SyntheticSpec(num_classes=3, per_class=15, dim=96, noise=0.3,
                         threshold=0.75, seed=2)
    ds = clustered_dataset(spec, split=SplitConfig(train_frac=0.2, val_frac=0.2,
                                                   seed=1))
    means = _norm_severity_means(ds, TWIN_TRAIN, seeds=range(3), eps=0.1)
    assert means["l1"] > means["l2"] > means["linf"], means
    assert means["linf"] < 0.10, means


# ---------------------------------------------------------------- criterion 6


EPS_LADDER = (0.0, 0.1, 0.2, 0.5, 1.0)


def _l2_sweep(ds, params, structure):
    accs = []
    for eps in EPS_LADDER:
        budget = AttackBudget(norm="l2", eps=eps, iterations=40)
        x_prime, _ = topk_pgd_attack(params, ds, budget, structure=structure)
        accs.append(attack_report(params, ds, x_prime, structure=structure).accuracy)
    return accs


def _assert_plateau(accs):
    for earlier, later in zip(accs, accs[1:]):
        assert later <= earlier + 0.02, accs
    assert abs(accs[3] - accs[4]) < 0.03, accs


def test_criterion_06_eps_sweep_plateau_on_cora():
    ds = standard_split(planetoid_or_skip("cora"))
    params, _ = train("gcn", ds, TrainConfig(seed=0))
    _assert_plateau(_l2_sweep(ds, params, prepare_structure("gcn", ds)))


def test_criterion_06_synthetic_twin_plateau(twin):
    ds, params, structure, _ = twin
    _assert_plateau(_l2_sweep(ds, params, structure))


# ---------------------------------------------------------------- criterion 7


def test_criterion_07_mean_shift_variance_law():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(40, 12))
    base = np.var(x, axis=0).sum()
    for lam in (0.0, 0.25, 0.5, 1.0):
        shifted = mean_shift_poison(x, lam)
        assert abs(np.var(shifted, axis=0).sum() - (1 - lam) ** 2 * base) <= 1e-9


# ---------------------------------------------------------------- criterion 8


def majority_frequency(labels, mask) -> float:
    counts = np.bincount(labels[mask])
    return counts.max() / counts.sum()


def test_criterion_08_full_collapse_lands_on_majority_class_cora():
    ds = standard_split(planetoid_or_skip("cora"))
    x_star = mean_shift_poison(ds.features, 1.0)
    outcome = poison_retrain_evaluate(ds, x_star, TrainConfig(seed=0))
    floor = majority_frequency(ds.labels, ds.test_mask)
    assert abs(outcome.poisoned_report.accuracy - floor) <= 0.05


def test_criterion_08_synthetic_twin_collapse(twin):
    ds, _, _, _ = twin
    x_star = mean_shift_poison(ds.features, 1.0)
    outcome = poison_retrain_evaluate(ds, x_star, TWIN_TRAIN)
    floor = majority_frequency(ds.labels, ds.test_mask)
    assert abs(outcome.poisoned_report.accuracy - floor) <= 0.05


# ---------------------------------------------------------------- criterion 9


TOLERANCE_LAMBDAS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6)


def test_criterion_09_small_lambda_tolerance_on_cora():
    ds = standard_split(planetoid_or_skip("cora"))
    params, _ = train("gcn", ds, TrainConfig(seed=0))
    clean = evaluate_split(params, ds, "test").accuracy
    for lam in TOLERANCE_LAMBDAS:
        outcome = poison_retrain_evaluate(ds, mean_shift_poison(ds.features, lam),
                                          TrainConfig(seed=0))
        assert abs(outcome.poisoned_report.accuracy - clean) <= 0.10, lam


def test_criterion_09_synthetic_twin_tolerance(twin):
    ds, _, _, clean = twin
    for lam in TOLERANCE_LAMBDAS:
        outcome = poison_retrain_evaluate(ds, mean_shift_poison(ds.features, lam),
                                          TWIN_TRAIN)
        assert abs(outcome.poisoned_report.accuracy - clean.accuracy) <= 0.10, lam


# --------------------------------------------------------------- criterion 10


def _contrastive_drop(ds, train_cfg, seeds):
    drops = []
    for seed in seeds:
        cfg = replace(train_cfg, seed=seed)
        baseline, _ = train("gcn", ds, cfg)
        clean_acc = evaluate_split(baseline, ds, "test").accuracy
        opt = gcl_poison(ds.features, PoisonConfig(lam=0.3, seed=seed))
        assert opt.trace[-1]["total"] < opt.trace[0]["total"], f"seed {seed}"
        outcome = poison_retrain_evaluate(ds, opt.x_star, cfg)
        drops.append(clean_acc - outcome.poisoned_report.accuracy)
    return drops


def test_criterion_10_contrastive_poison_efficacy_on_cora():
    ds = standard_split(planetoid_or_skip("cora"))
    drops = _contrastive_drop(ds, TrainConfig(), seeds=range(5))
    assert np.mean(drops) >= 0.20, drops


def test_criterion_10_synthetic_twin_efficacy():
    spec = SyntheticSpec(num_classes=3, per_class=15, dim=96, noise=0.3,
                         threshold=0.75, seed=2)
    ds = clustered_dataset(spec, split=SplitConfig(train_frac=0.2, val_frac=0.2,
                                                   seed=1))
    drops = _contrastive_drop(ds, TWIN_TRAIN, seeds=range(5))
    assert np.mean(drops) >= 0.20, drops


# --------------------------------------------------------------- criterion 11


def test_criterion_11_contrastive_loss_oracles():
    rng = np.random.default_rng(17)
    for shape in ((1, 1), (2, 3), (4, 4), (5, 8)):
        clean = rng.normal(size=shape)
        star = rng.normal(size=shape)
        assert abs(gcl_sim_loss(star).item() - loop_gcl_sim(star)) <= 1e-12
        assert abs(gcl_dis_loss(clean, star).item()
                   - loop_gcl_dis(clean, star)) <= 1e-12
    row = np.array([[3.0, 4.0]])
    assert gcl_sim_loss(row).item() == -1.0
    assert gcl_dis_loss(row, row.copy()).item() == 1.0


# --------------------------------------------------------------- criterion 12


def test_criterion_12_graph_builder_matches_pair_scan():
    # Low dimension on purpose: on the 2-sphere a fair share of random pairs
    # clears cosine 0.85, so that threshold gets a non-empty comparison.
    rng = np.random.default_rng(23)
    x = rng.normal(size=(50, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    sizes = []
    for threshold in (-1.0, 0.0, 0.85, 1.01):
        got = build_graph_from_embeddings(x, threshold)
        expected = np.asarray(brute_force_edges(x, threshold),
                              dtype=np.int64).reshape(-1, 2)
        assert np.array_equal(got, expected), threshold
        sizes.append(len(got))
    assert sizes == sorted(sizes, reverse=True)
    assert sizes[0] == 50 * 49 // 2 and sizes[-1] == 0


# --------------------------------------------------------------- criterion 13


SMALL_INI = """\
[dataset]
kind = synthetic
name = toy
classes = 3
per_class = 8
dim = 16
noise = 0.2
threshold = 0.5
train_frac = 0.25
val_frac = 0.25

[model]
epochs = 25
patience = 10
hidden = 8,4

[attack]
iterations = 5
k = 6

[sweep]
eps = 0.0,0.2
norms = l1,linf
seeds = 0,1

[run]
seed = 7
"""


def test_criterion_13_rerun_is_byte_deterministic(tmp_path):
    ini = tmp_path / "exp.ini"
    ini.write_text(SMALL_INI)
    outputs = []
    for out in ("a", "b"):
        cfg = parse_config(ini, {"out": str(tmp_path / out)})
        cmd_sweep(cfg, "attack")
        svg = tmp_path / out / "acc.svg"
        cmd_plot(tmp_path / out / "metrics.csv", "eps", "accuracy", "norm", svg,
                 where={"phase": "attack"})
        outputs.append(((tmp_path / out / "metrics.csv").read_bytes(),
                        svg.read_bytes()))
    assert outputs[0][0] == outputs[1][0]
    assert outputs[0][1] == outputs[1][1]


# --------------------------------------------------------------- criterion 14


def test_criterion_14_cora_sweep_suite_under_ten_minutes(tmp_path):
    planetoid_or_skip("cora")
    ini = tmp_path / "cora.ini"
    ini.write_text(f"""\
[dataset]
kind = planetoid
name = cora
content = {DATA_DIR / 'cora' / 'cora.content'}
cites = {DATA_DIR / 'cora' / 'cora.cites'}

[sweep]
eps = 0.0,0.1,0.2,0.5,1.0
norms = l1,l2,linf
lambda = 0.1,0.2,0.3,0.4,0.5,0.6,1.0
seeds = 0
""")
    started = time.perf_counter()
    cfg = parse_config(ini, {"out": str(tmp_path / "attack")})
    cmd_sweep(cfg, "attack")
    cfg = parse_config(ini, {"out": str(tmp_path / "poison")})
    cmd_sweep(cfg, "poison")
    elapsed = time.perf_counter() - started
    assert elapsed < 600.0, f"sweep suite took {elapsed:.0f}s"


# ----------------------------------------------------------------- secondary


def test_secondary_hand_built_embeddings_round_trip(tmp_path):
    rng = np.random.default_rng(41)
    x = rng.normal(size=(5, 768))
    path = tmp_path / "fixture.feat"
    write_feature_file(path, x)
    back = read_feature_file(path)
    assert back.shape == (5, 768)
    assert back.tobytes() == x.tobytes()


def test_secondary_extractor_integration(tmp_path):
    cli_js = REPO_ROOT / "embed-extract" / "dist" / "cli.js"
    if not cli_js.exists():
        pytest.skip("extraction tool not built; run npm install && npm run "
                    "build inside embed-extract/ first")
    corpus = tmp_path / "corpus.tsv"
    corpus.write_text(
        "alpha\tgraph neural networks pass messages\n"
        "beta\tpoisoned features mislead the fit\n"
        "alpha\tgraph neural networks pass messages\n")
    outputs = []
    for run in ("one", "two"):
        prefix = tmp_path / run
        subprocess.run(
            ["node", str(cli_js), "extract", "--corpus", str(corpus),
             "--out", str(prefix)],
            check=True, capture_output=True, text=True)
        outputs.append((Path(f"{prefix}.feat").read_bytes(),
                        Path(f"{prefix}.labels").read_text()))
    assert outputs[0] == outputs[1]
    x = read_feature_file(tmp_path / "one.feat")
    assert x.shape == (3, 768)
    assert x[0].tobytes() == x[2].tobytes()  # identical texts, identical rows
    assert read_label_file(tmp_path / "one.labels") == ["alpha", "beta", "alpha"]
