"""Class-balancing augmentation: oversampling with replacement and per-class GMM sampling.

The mixture model uses diagonal covariances and is fitted by EM:

    E-step  r[i, k] = w_k N(x_i | mu_k, var_k) / sum_j w_j N(x_i | mu_j, var_j)
    M-step  w_k = N_k / n,  mu_k = sum_i r[i, k] x_i / N_k,
            var_k = max(sum_i r[i, k] (x_i - mu_k)^2 / N_k, floor)

with the per-dimension floor ``1e-6 * (data variance + 1e-12)``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from noisecnn import rng
from noisecnn.data import Window

log = logging.getLogger(__name__)

NONE = "NONE"
OVERSAMPLE = "OVERSAMPLE"
GMM = "GMM"
AUGMENT_KINDS = (NONE, OVERSAMPLE, GMM)
MATCH_MAJORITY = "match-majority"

VARIANCE_FLOOR_SCALE = 1e-6
DEBUG_CHECKS = False


@dataclass(frozen=True)
class AugmentSpec:
    kind: str = NONE
    gmm_components: int = 3
    target_per_class: int | str = MATCH_MAJORITY
    seed: int = 0
    max_iters: int = 100
    tol: float = 1e-6

    def __post_init__(self):
        if self.kind not in AUGMENT_KINDS:
            raise ValueError(f"unknown augmentation kind {self.kind!r}")
        if self.kind == GMM and self.gmm_components < 1:
            raise ValueError("gmm_components must be >= 1")
        if self.target_per_class != MATCH_MAJORITY and not (
            isinstance(self.target_per_class, int) and self.target_per_class >= 1
        ):
            raise ValueError(f"target_per_class must be a positive integer or {MATCH_MAJORITY!r}")


@dataclass
class GmmModel:
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, D)
    variances: np.ndarray  # (K, D)

    @property
    def num_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def _group_by_class(windows) -> dict[int, list[Window]]:
    groups: dict[int, list[Window]] = {}
    for w in windows:
        groups.setdefault(w.label.index, []).append(w)
    return dict(sorted(groups.items()))


def _targets(groups, target) -> dict[int, int]:
    if target == MATCH_MAJORITY:
        top = max(len(g) for g in groups.values())
        return {c: top for c in groups}
    return {c: max(int(target), len(g)) for c, g in groups.items()}


def oversample(windows, seed: int, target_per_class: int | str = MATCH_MAJORITY) -> list[Window]:
    """Top up each class by drawing its own windows uniformly with replacement.

    Originals come first in input order, followed by the duplicates class by class.
    """
    windows = list(windows)
    if not windows:
        raise ValueError("cannot oversample an empty set")
    groups = _group_by_class(windows)
    out = list(windows)
    for c, target in _targets(groups, target_per_class).items():
        members = groups[c]
        need = target - len(members)
        if need <= 0:
            continue
        picks = rng.stream(seed, c).integers(0, len(members), size=need)
        out.extend(Window(members[j].values.copy(), members[j].label, members[j].source_id) for j in picks)
    return out


def _log_gaussians(x, model: GmmModel) -> np.ndarray:
    # log w_k + log N(x_i | mu_k, diag(var_k)), shape (n, K)
    diff = x[:, None, :] - model.means[None, :, :]
    maha = np.sum(diff * diff / model.variances[None, :, :], axis=2)
    d = x.shape[1]
    log_det = np.sum(np.log(model.variances), axis=1)
    with np.errstate(divide="ignore"):
        log_w = np.log(model.weights)
    return log_w[None, :] - 0.5 * (d * np.log(2.0 * np.pi) + log_det[None, :] + maha)


def _logsumexp(a: np.ndarray) -> np.ndarray:
    top = a.max(axis=1, keepdims=True)
    return (top + np.log(np.exp(a - top).sum(axis=1, keepdims=True)))[:, 0]


def responsibilities(x, model: GmmModel) -> tuple[np.ndarray, np.ndarray]:
    """Posterior component probabilities per vector and per-vector log-likelihood."""
    x = np.asarray(x, dtype=np.float64)
    log_p = _log_gaussians(x, model)
    ll = _logsumexp(log_p)
    resp = np.exp(log_p - ll[:, None])
    if DEBUG_CHECKS:
        assert np.allclose(resp.sum(axis=1), 1.0, atol=1e-9, rtol=0.0), "responsibility rows must sum to 1"
    return resp, ll


def log_likelihood(x, model: GmmModel) -> float:
    """Mean per-vector log-likelihood."""
    return float(responsibilities(x, model)[1].mean())


def _kmeans_pp(x, k: int, gen: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centres = [int(gen.integers(n))]
    d2 = np.sum((x - x[centres[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            remaining = np.setdiff1d(np.arange(n), centres)
            idx = int(remaining[gen.integers(remaining.size)])
        else:
            idx = int(np.searchsorted(np.cumsum(d2), gen.random() * total, side="right"))
            idx = min(idx, n - 1)
        centres.append(idx)
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return x[centres].copy()


def gmm_fit(vectors, components: int, max_iters: int = 100, tol: float = 1e-6,
            seed: int = 0) -> tuple[GmmModel, list[float]]:
    """Diagonal-covariance EM from k-means++ seeded means.

    Returns the model and the mean log-likelihood evaluated before each M-step
    plus once for the final parameters.  Stops when consecutive values differ
    by less than ``tol``.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError(f"expected an (n, D) array of vectors, got shape {x.shape}")
    n, d = x.shape
    if components < 1:
        raise ValueError("components must be >= 1")
    if n < components:
        raise ValueError(f"{n} vectors cannot support {components} components")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input vector")

    data_var = x.var(axis=0)
    floor = VARIANCE_FLOOR_SCALE * (data_var + 1e-12)
    gen = rng.stream(seed, 7)
    model = GmmModel(
        weights=np.full(components, 1.0 / components),
        means=_kmeans_pp(x, components, gen),
        variances=np.tile(np.maximum(data_var, floor), (components, 1)),
    )
    trace: list[float] = []
    for _ in range(max_iters):
        resp, ll = responsibilities(x, model)
        trace.append(float(ll.mean()))
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            break
        nk = resp.sum(axis=0)
        live = nk > 0
        weights = nk / n
        means = model.means.copy()
        variances = model.variances.copy()
        means[live] = (resp[:, live].T @ x) / nk[live, None]
        for k in np.flatnonzero(live):
            diff = x - means[k]
            variances[k] = np.maximum((resp[:, k] @ (diff * diff)) / nk[k], floor)
        model = GmmModel(weights, means, variances)
    else:
        trace.append(log_likelihood(x, model))
    return model, trace


def gmm_sample(model: GmmModel, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` vectors: pick a component by weight, then each dimension independently."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return np.zeros((0, model.dim))
    gen = rng.stream(seed, 11)
    cdf = np.cumsum(model.weights)
    comp = np.minimum(np.searchsorted(cdf / cdf[-1], gen.random(n), side="right"), model.num_components - 1)
    z = rng.gaussian(gen, n * model.dim).reshape(n, model.dim)
    return model.means[comp] + np.sqrt(model.variances[comp]) * z


def augment_gmm(windows, spec: AugmentSpec, notes: list[str] | None = None,
                models: dict[int, GmmModel] | None = None) -> list[Window]:
    """Fit a GMM per class and append sampled windows until each class reaches its target.

    A class with fewer windows than ``spec.gmm_components`` is fitted with one
    component per window instead; the fallback is appended to ``notes``.
    Fitted models are stored into ``models`` when a dict is passed.
    """
    windows = list(windows)
    if not windows:
        raise ValueError("cannot augment an empty set")
    groups = _group_by_class(windows)
    out = list(windows)
    for c, target in _targets(groups, spec.target_per_class).items():
        members = groups[c]
        need = target - len(members)
        if need <= 0:
            continue
        k = spec.gmm_components
        if len(members) < k:
            msg = f"class {members[0].label.name!r}: {len(members)} windows < {k} components; using {len(members)}"
            log.warning(msg)
            if notes is not None:
                notes.append(msg)
            k = len(members)
        x = np.stack([w.values for w in members])
        sub_seed = rng.stable_hash("gmm", spec.seed, c)
        model, _ = gmm_fit(x, k, spec.max_iters, spec.tol, seed=sub_seed)
        if models is not None:
            models[c] = model
        label = members[0].label
        for i, v in enumerate(gmm_sample(model, need, seed=sub_seed)):
            out.append(Window(v, label, f"gmm:{label.name}:{i}"))
    return out


def augment(windows, spec: AugmentSpec, notes: list[str] | None = None) -> list[Window]:
    if spec.kind == OVERSAMPLE:
        return oversample(windows, spec.seed, spec.target_per_class)
    if spec.kind == GMM:
        return augment_gmm(windows, spec, notes)
    return list(windows)


def dump_models(models: dict[int, GmmModel], out_dir, label_names: dict[int, str] | None = None) -> list[Path]:
    """One CSV per class: ``component, weight, mean_0..mean_{D-1}, var_0..var_{D-1}``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for c, model in sorted(models.items()):
        name = (label_names or {}).get(c, f"class{c}")
        path = out_dir / f"gmm_{name}.csv"
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["component", "weight"]
                       + [f"mean_{j}" for j in range(model.dim)]
                       + [f"var_{j}" for j in range(model.dim)])
            for k in range(model.num_components):
                w.writerow([k, repr(float(model.weights[k]))]
                           + [repr(float(v)) for v in model.means[k]]
                           + [repr(float(v)) for v in model.variances[k]])
        paths.append(path)
    return paths
