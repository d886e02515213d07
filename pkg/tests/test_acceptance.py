"""End-to-end acceptance checks. Each test prints one PASS/FAIL line in the terminal summary.

The training-based checks (5 to 8) run full-size jobs and take several minutes
in total on one core.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from latentgeo import metrics as M
from latentgeo import ndkernel as nk
from latentgeo.cli import main
from latentgeo.datasets import generate_citation_graph, generate_image_dataset
from latentgeo.eval import (
    ExperimentConfig,
    evaluate_suite,
    evaluate_triplet,
    median_over_seeds,
    posterior_mean_sv_ratio,
    run_iat_experiment,
)
from latentgeo.eval.pipeline import sample_triplets
from latentgeo.iat import InterpMlp, IatVariant, iat_loss, sample_triplet_batch
from latentgeo.interp import InterpolationKind, interpolate, lerp, norm_interp, slerp
from latentgeo.models import GvaeModel, TrainConfig, VaeModel, elbo_image, gvae_elbo, train, window_means

SEEDS = (0, 1, 2)


def _detail(record_property, text):
    record_property("detail", text)


# -- 1, 2: interpolation ------------------------------------------------------


@pytest.mark.criterion(1, "interpolation endpoints and slerp norm preservation")
def test_interpolation_unit_suite(record_property):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal((2, 1000, 16))
    worst = 0.0
    for kind in InterpolationKind:
        at0 = interpolate(kind, a, b, np.zeros(1000))
        at1 = interpolate(kind, a, b, np.ones(1000))
        worst = max(worst, np.abs(at0 - a).max(), np.abs(at1 - b).max())
    b_eq = b / np.linalg.norm(b, axis=1, keepdims=True) * np.linalg.norm(a, axis=1, keepdims=True)
    out = slerp(a, b_eq, rng.uniform(0, 1, 1000))
    norm_err = np.abs(np.linalg.norm(out, axis=1) - np.linalg.norm(a, axis=1)).max()
    elapsed = time.perf_counter() - start
    _detail(record_property, f"endpoint err {worst:.1e}, norm err {norm_err:.1e}, {elapsed:.2f}s")
    assert worst <= 1e-9 and norm_err <= 1e-9 and elapsed < 5.0


@pytest.mark.criterion(2, "normalised interpolation keeps the N(0,1) marginal")
def test_distribution_matching(record_property):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_ks = 0.0
    for lam in (0.25, 0.5, 0.75):
        z1, z2 = rng.standard_normal((2, 20_000, 8))
        out = norm_interp(z1, z2, lam)
        worst_ks = max(worst_ks, max(stats.kstest(out[:, j], "norm").statistic for j in range(8)))
    z1, z2 = rng.standard_normal((2, 20_000, 8))
    var = lerp(z1, z2, 0.5).var(axis=0)
    elapsed = time.perf_counter() - start
    _detail(record_property, f"max KS {worst_ks:.4f}, lerp var [{var.min():.3f}, {var.max():.3f}], {elapsed:.1f}s")
    assert worst_ks < 0.015
    assert np.all(np.abs(var - 0.5) <= 0.02)
    assert elapsed < 30.0


# -- 3, 4: gradients and KL ------------------------------------------------------


def _off_kinks(params, seed):
    rng = np.random.default_rng(seed)
    for p in params:
        p.data = p.data + 0.05 * rng.standard_normal(p.shape)


def _rel_err(loss_fn, params):
    analytic = nk.grad(loss_fn(), params)
    numeric = nk.finite_difference_gradient(lambda: loss_fn().item(), params)
    return nk.max_relative_error(analytic, numeric, floor=1e-3)


@pytest.mark.criterion(3, "ELBO, GVAE ELBO and IAT gradients match finite differences")
def test_gradient_correctness(record_property):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    errors = {}

    vae = VaeModel(8, 4, hidden=6, seed=0)
    _off_kinks(vae.parameters(), 0)
    x = rng.uniform(-1, 1, (3, 8, 8))
    noise = rng.standard_normal((3, 4))
    errors["elbo"] = _rel_err(lambda: elbo_image(vae, x, noise=noise)[0], vae.parameters())

    gvae = GvaeModel(6, 4, gcn_hidden=5, seed=0)
    _off_kinks(gvae.parameters(), 1)
    a = (rng.uniform(size=(2, 6, 6)) < 0.3).astype(float)
    gnoise = rng.standard_normal((2, 6, 4))
    errors["gvae_elbo"] = _rel_err(lambda: gvae_elbo(gvae, a, noise=gnoise)[0], gvae.parameters())

    images = generate_image_dataset(n_objects=2, n_angles=12, size=16, master_seed=3)
    trips = sample_triplet_batch(images.view("train"), 2, seed=0)
    for variant in IatVariant:
        model = VaeModel(16, 4, hidden=5, seed=1)
        mlp = InterpMlp(4, seed=2) if variant.uses_mlp else None
        params = model.parameters() + (mlp.parameters() if mlp else [])
        _off_kinks(params, 3)
        errors[variant.value] = _rel_err(lambda: iat_loss(model, trips, variant, "norm", mlp), params)

    elapsed = time.perf_counter() - start
    worst = max(errors, key=errors.get)
    _detail(record_property, f"worst {worst} {errors[worst]:.1e}, {elapsed:.1f}s")
    assert all(e < 1e-4 for e in errors.values()), errors
    assert elapsed < 120.0


@pytest.mark.criterion(4, "closed-form KL agrees with Monte Carlo")
def test_kl_oracle(record_property):
    rng = np.random.default_rng(4)
    worst = 0.0
    for i in range(20):
        mu = rng.normal(0, 1, 3)
        logvar = rng.uniform(-1.5, 1.5, 3)
        est, se = M.kl_monte_carlo(mu, logvar, n_samples=1_000_000, seed=100 + i)
        worst = max(worst, abs(est - M.kl_gaussian_std(mu, logvar)) / se)
    _detail(record_property, f"max |MC - closed| = {worst:.2f} standard errors over 20 pairs")
    assert worst <= 3.0


# -- 5 to 8: trained models ---------------------------------------------------------


@pytest.fixture(scope="module")
def images():
    return generate_image_dataset(master_seed=0)


@pytest.fixture(scope="module")
def graph():
    return generate_citation_graph(master_seed=0)


@pytest.mark.criterion(5, "rank-R mean head gives rank-R posterior means")
def test_rank_bottleneck(images, record_property):
    test = images.view("test")
    ratios, times = {}, []
    for r in (2, 8, 32):
        start = time.perf_counter()
        model = VaeModel(32, 64, rank=r, seed=r)
        train(model, images, TrainConfig.defaults("image", iters=300, seed=r, log_every=0))
        ratios[r] = posterior_mean_sv_ratio(model, test, r)
        times.append(time.perf_counter() - start)
    _detail(record_property, ", ".join(f"R{r}: {v:.1e}" for r, v in ratios.items()) + f"; slowest {max(times):.0f}s")
    assert all(v < 1e-9 for v in ratios.values())
    assert max(times) < 60.0


def _timed_cell(dataset, variant, seed):
    base = ExperimentConfig.defaults("image", n_triplets=500)
    start = time.perf_counter()
    (cell,) = run_iat_experiment(base, dataset, variants=(variant,), kind="norm", seeds=(seed,))
    return cell, time.perf_counter() - start


@pytest.fixture(scope="module")
def image_iat_cells(images):
    """Baseline and mlp_decode cells for three seeds, same iteration budget."""
    return {(v, s): _timed_cell(images, v, s) for v in ("none", "mlp_decode") for s in SEEDS}


@pytest.fixture(scope="module")
def graph_sanity_run(graph):
    start = time.perf_counter()
    model = GvaeModel(120, 16, seed=0)
    res = train(model, graph, TrainConfig.defaults("graph", iters=4000, seed=0, log_every=0))
    return res, time.perf_counter() - start


@pytest.mark.criterion(6, "ELBO decreases over 4000 iterations on both synthetic sets")
def test_training_sanity(image_iat_cells, graph_sanity_run, record_property):
    (cell, image_secs) = image_iat_cells[("none", 0)]
    assert len(cell.trace) == 4000
    img_first, img_last = window_means(cell.trace)
    res, graph_secs = graph_sanity_run
    g_first, g_last = window_means(res.trace)
    _detail(
        record_property,
        f"image {img_first:.1f} -> {img_last:.1f}, graph {g_first:.1f} -> {g_last:.1f}, {image_secs + graph_secs:.0f}s",
    )
    assert img_last < img_first and g_last < g_first
    assert image_secs + graph_secs < 15 * 60


@pytest.mark.criterion(7, "mlp_decode IAT cuts median interpolated mse_x by at least 20%")
def test_iat_directional(image_iat_cells, record_property):
    reports = [rep for (cell, _) in image_iat_cells.values() for rep in cell.reports]
    assert all(r.status == "ok" for r in reports)
    med = {r.keys["iat"]: r.means["mse_x"] for r in median_over_seeds(reports, group_by=("algorithm", "iat"))}
    reduction = 1.0 - med["mlp_decode"] / med["none"]
    total = sum(secs for _, secs in image_iat_cells.values())
    _detail(record_property, f"mse_x {med['none']:.4f} -> {med['mlp_decode']:.4f} ({100 * reduction:.0f}% lower), {total / 60:.1f} min")
    assert reduction >= 0.20
    assert total < 45 * 60


GRAPH_FLOOR_TRAIN = dict(iters=5000, lr=5e-3, kl_weight=1.0 / 120)
GRAPH_FLOOR_HIDDEN = 128


@pytest.mark.criterion(8, "GVAE eIoU floor for reconstruction and slerp interpolation")
def test_graph_reconstruction_floor(graph, record_property):
    test = graph.view("test")
    snaps = test.stacked()
    recon, inter = [], []
    base = ExperimentConfig.defaults("graph", gcn_hidden=GRAPH_FLOOR_HIDDEN, n_triplets=500)
    for seed in SEEDS:
        model = GvaeModel(120, 16, gcn_hidden=GRAPH_FLOOR_HIDDEN, seed=seed)
        train(model, graph, TrainConfig.defaults("graph", seed=seed, log_every=0, **GRAPH_FLOOR_TRAIN))
        probs = model.decode(model.encode_map(snaps))
        recon.append(float(np.mean([M.e_iou(p, a) for p, a in zip(probs, snaps)])))
        reps, _ = evaluate_suite(model, test, ["slerp"], base.n_triplets, seed=0)
        inter.append(reps[0].means["eiou_x"])
    r, i = float(np.median(recon)), float(np.median(inter))
    _detail(record_property, f"median reconstruction {r:.3f}, median slerp {i:.3f}")
    assert r >= 0.7 and i >= 0.5


# -- 9, 10: reproducibility and constructed oracle -----------------------------------


def _tree(path):
    return {str(p.relative_to(path)): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


@pytest.mark.criterion(9, "every command reruns bit-exactly from its run_config.json")
def test_rerun_determinism(tmp_path, record_property):
    data = tmp_path / "data"
    runs = tmp_path / "runs"
    small = ["--objects", "2", "--angles", "12", "--size", "16"]
    tiny = ["--latent-dim", "4", "--hidden", "16", "--batch", "8", "--lr", "0.002", "--iters", "10"]
    assert main(["gen-data", "--kind", "image", "--seed", "3", *small, "--out", str(data)]) == 0
    assert main(["gen-data", "--config", str(data / "run_config.json"), "--out", str(tmp_path / "data2")]) == 0
    checked = ["gen-data"] if _tree(data) == _tree(tmp_path / "data2") else []

    assert main(["train", "--data", str(data), *tiny, "--out", str(runs), "--run-name", "train-a"]) == 0
    ckpt = str(runs / "train-a" / "model.ckpt")
    commands = {
        "train": ["train", "--data", str(data), *tiny],
        "iat": ["iat", "--data", str(data), *tiny],
        "eval": ["eval", "--checkpoint", ckpt, "--data", str(data), "--triplets", "6"],
        "compare": ["compare", "--checkpoint", ckpt, "--data", str(data), "--triplets", "6"],
        "sweep": ["sweep", "--data", str(data), *tiny, "--ranks", "2", "--dims", "2", "--triplets", "6", "--seeds", "0,1", "--jobs", "1"],
        "iat-table": ["iat", "--data", str(data), *tiny, "--variants", "none,mlp_latent", "--triplets", "6"],
        "label-study": ["label-study", "--data", str(data), *tiny, "--budgets", "3,6", "--triplets", "6"],
    }
    for name, args in commands.items():
        first = runs / f"{name}-1"
        assert main(args + ["--out", str(runs), "--run-name", first.name]) == 0
        cmd = args[0]
        assert main([cmd, "--config", str(first / "run_config.json"), "--out", str(runs), "--run-name", f"{name}-2"]) == 0
        if _tree(first) == _tree(runs / f"{name}-2"):
            checked.append(name)
    _detail(record_property, f"identical outputs for {len(checked)}/{len(commands) + 1} commands")
    assert checked == ["gen-data", *commands]


@pytest.mark.criterion(10, "constructed linear model is reproduced exactly by lerp")
def test_constructed_fixture_oracle(linear_fixture, record_property):
    model, ds = linear_fixture
    test = ds.view("test")
    n_pool = sum(math.comb(len(s.times), 3) for s in test.sequences)
    triplets, mode = sample_triplets(test, n_pool, seed=0)
    worst = max(evaluate_triplet(model, t, "linear").values["mse_x"] for t in triplets)
    _detail(record_property, f"max mse_x {worst:.1e} over all {n_pool} triplets")
    assert mode == "without_replacement"
    assert worst < 1e-6
