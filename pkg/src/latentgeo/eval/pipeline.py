"""Triplet protocol: encode the outer samples, interpolate, decode, compare with the middle one."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import metrics as M
from .. import ndkernel as nk
from ..datasets.core import Dataset, Triplet, enumerate_triplets, make_triplet
from ..interp import InterpolationError, InterpolationKind, get_interpolator, lambda_from_times

WITHOUT_REPLACEMENT = "without_replacement"
WITH_REPLACEMENT = "with_replacement"
IMAGE_RANGE = 2.0  # pixel values live in [-1, 1]


@dataclass
class TripletResult:
    triplet_id: str
    kind: str
    values: dict[str, float]
    lam: float = float("nan")


@dataclass
class MetricReport:
    keys: dict
    means: dict[str, float]
    stderrs: dict[str, float]
    n_triplets: int
    excluded: dict[str, int] = field(default_factory=dict)
    sampling: str = WITHOUT_REPLACEMENT
    status: str = "ok"
    extras: dict[str, float] = field(default_factory=dict)

    @property
    def metrics(self) -> list[str]:
        return sorted(self.means)


def triplet_id(t: Triplet) -> str:
    i, j, k = t.indices
    return f"{t.object_id}:{i}-{j}-{k}"


def metric_names(domain: str) -> tuple[str, ...]:
    return M.IMAGE_METRICS if domain == "image" else M.GRAPH_METRICS


def _domain(model) -> str:
    return getattr(model, "domain", "image")


def _interpolated_codes(z1, z3, lam, kind, interp_mlp=None) -> np.ndarray:
    """Batched ``f(z1, z3, lam)`` on flattened codes, optionally refined by the interpolation MLP."""
    b = z1.shape[0]
    f = get_interpolator(kind)
    z = np.asarray(f(z1.reshape(b, -1), z3.reshape(b, -1), lam)).reshape(z1.shape)
    if interp_mlp is not None:
        z = interp_mlp(z1, z3, z).data
    return z


def _compare(domain: str, x_inter, x2, z_inter, z2) -> dict[str, float]:
    if domain == "image":
        vals = {
            "mse_x": M.mse(x_inter, x2),
            "ssim_x": M.ssim(x_inter, x2, IMAGE_RANGE),
            "psnr_x": M.psnr(x_inter, x2, IMAGE_RANGE),
        }
    else:
        vals = {"bce_x": M.bce(x_inter, x2), "eiou_x": M.e_iou(x_inter, x2)}
    vals["mse_z"] = M.mse(z_inter, z2)
    vals["cosdist_z"] = M.cosine_distance(z_inter.ravel(), z2.ravel())
    return vals


def evaluate_triplet(model, triplet: Triplet, kind, interp_mlp=None) -> TripletResult:
    """Score one triplet with point (posterior-mean) encodings; no sampling anywhere."""
    kind = InterpolationKind(kind)
    tid = triplet_id(triplet)
    lam = lambda_from_times(*triplet.times)
    z1, z2, z3 = (np.asarray(model.encode_map(x)) for x in triplet.xs)
    try:
        z_inter = _interpolated_codes(z1[None], z3[None], np.array([lam]), kind, interp_mlp)[0]
    except InterpolationError as e:
        raise InterpolationError(f"triplet {tid}: {e}") from None
    x_inter = np.asarray(model.decode(z_inter))
    return TripletResult(tid, kind.value, _compare(_domain(model), x_inter, triplet.xs[1], z_inter, z2), lam)


def sample_triplets(test_set: Dataset, n: int, seed) -> tuple[list[Triplet], str]:
    """Uniform draws without replacement until the pool is exhausted, then with replacement."""
    pool = enumerate_triplets(test_set)
    if not pool:
        raise ValueError("test set holds no triplet")
    rng = nk.make_rng(seed)
    if n <= len(pool):
        picks, mode = rng.permutation(len(pool))[:n], WITHOUT_REPLACEMENT
    else:
        picks = np.concatenate([rng.permutation(len(pool)), rng.integers(0, len(pool), n - len(pool))])
        mode = WITH_REPLACEMENT
    seqs = test_set.sequences
    out = []
    for p in picks:
        pos, i, j, k = pool[p]
        out.append(make_triplet(seqs[pos], i, j, k))
    return out, mode


def _encode_sequences(model, test_set: Dataset) -> dict[int, np.ndarray]:
    return {s.object_id: np.asarray(model.encode_map(s.samples)) for s in test_set.sequences}


def evaluate_triplets(model, triplets: list[Triplet], kinds, interp_mlp=None, codes=None) -> dict[str, list[TripletResult]]:
    """Batched equivalent of calling :func:`evaluate_triplet` on every triplet for every kind."""
    domain = _domain(model)
    if codes is None:
        z = [np.stack([np.asarray(model.encode_map(x)) for x in t.xs]) for t in triplets]
        z1, z2, z3 = (np.stack([c[r] for c in z]) for r in range(3))
    else:
        z1, z2, z3 = (np.stack([codes[t.object_id][t.indices[r]] for t in triplets]) for r in range(3))
    lam = lambda_from_times(*np.array([t.times for t in triplets]).T)
    lam = np.atleast_1d(lam)
    ids = [triplet_id(t) for t in triplets]
    out = {}
    for kind in kinds:
        kind = InterpolationKind(kind)
        try:
            zi = _interpolated_codes(z1, z3, lam, kind, interp_mlp)
        except InterpolationError as e:
            raise InterpolationError(f"{kind.value} on batch of {len(triplets)} triplets: {e}") from None
        xi = np.asarray(model.decode(zi))
        out[kind.value] = [
            TripletResult(ids[b], kind.value, _compare(domain, xi[b], triplets[b].xs[1], zi[b], z2[b]), float(lam[b]))
            for b in range(len(triplets))
        ]
    return out


def aggregate(results: list[TripletResult], keys: dict, sampling: str = WITHOUT_REPLACEMENT) -> MetricReport:
    """Arithmetic means and ``sd / sqrt(n)`` standard errors; infinite values are excluded and counted."""
    if not results:
        raise ValueError("no triplet results to aggregate")
    names = sorted(results[0].values)
    means, ses, excluded = {}, {}, {}
    for m in names:
        v = np.array([r.values[m] for r in results], dtype=np.float64)
        finite = v[np.isfinite(v)]
        if len(finite) < len(v):
            excluded[m] = int(len(v) - len(finite))
        elif m == "psnr_x":
            excluded[m] = 0
        means[m] = float(finite.mean()) if len(finite) else math.nan
        ses[m] = float(finite.std(ddof=1) / math.sqrt(len(finite))) if len(finite) > 1 else 0.0
    return MetricReport(dict(keys), means, ses, len(results), excluded, sampling)


def evaluate_suite(
    model,
    test_set: Dataset,
    kinds=("linear", "slerp", "norm", "slerp_norm"),
    n_triplets: int = 2000,
    seed: int = 0,
    interp_mlp=None,
    keys: dict | None = None,
) -> tuple[list[MetricReport], dict[str, list[TripletResult]]]:
    """One report per interpolation kind plus the raw per-triplet results behind it."""
    if test_set.n_samples == 0:
        raise ValueError("empty test set")
    if n_triplets < 1:
        raise ValueError("n_triplets must be >= 1")
    triplets, mode = sample_triplets(test_set, n_triplets, seed)
    raw = evaluate_triplets(model, triplets, kinds, interp_mlp, codes=_encode_sequences(model, test_set))
    reports = [aggregate(res, dict(keys or {}, algorithm=kind), mode) for kind, res in raw.items()]
    return reports, raw


def median_over_seeds(reports: list[MetricReport], group_by=("algorithm", "dim", "rank", "iat", "budget")) -> list[MetricReport]:
    """Per-group median of the per-seed means; ``stderrs`` hold the seed spread (median absolute deviation)."""
    groups: dict[tuple, list[MetricReport]] = {}
    for r in reports:
        groups.setdefault(tuple(r.keys.get(k) for k in group_by), []).append(r)
    out = []
    for key, rs in groups.items():
        ok = [r for r in rs if r.status == "ok"]
        keys = {k: v for k, v in zip(group_by, key) if v is not None}
        keys["seed"] = "median"
        if not ok:
            out.append(MetricReport(keys, {}, {}, 0, status="diverged"))
            continue
        means, spread = {}, {}
        for m in ok[0].means:
            v = np.array([r.means[m] for r in ok])
            means[m] = float(np.median(v))
            spread[m] = float(np.median(np.abs(v - means[m])))
        status = "ok" if len(ok) == len(rs) else f"partial:{len(ok)}/{len(rs)}"
        out.append(MetricReport(keys, means, spread, int(np.median([r.n_triplets for r in ok])), {}, ok[0].sampling, status))
    return out
