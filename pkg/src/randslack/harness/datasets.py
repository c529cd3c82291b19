"""Dataset generation and JSON persistence.

The synthetic protocol draws a hidden parameter vector with standard normal
entries, draws each input as fair Bernoulli bits, and labels it with the
exact decoder's output under the hidden parameters (the latent half is
discarded). The matching protocol builds keypoint-cloud pairs related by a
hidden permutation and affine grid cell, plus coordinate noise.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..features import InputX, Keypoints, ModelParams, SyntheticFeatureMap
from ..inference import exact_decode
from ..rng import derive_key
from ..structures import (
    AffineGrid,
    Kind,
    OneHotBit,
    StructureSpace,
    affine_cell_matrix,
    candidates,
    output_from_text,
    output_to_text,
)

MATCHING_DESCRIPTOR_DIM = 8


@dataclass
class Dataset:
    samples: list[tuple[InputX, object]]
    space: StructureSpace
    w_star: ModelParams
    seed: int
    protocol_tag: str


def synthetic_space(kind: Kind, v: int, b: int = 0) -> StructureSpace:
    """Space for the synthetic protocol: one-hot latent of dimension |E|^2."""
    if kind is Kind.SPANNING_TREE:
        ncand = v * (v - 1)
    elif kind is Kind.DAG:
        ncand = v * (v - 1) // 2
    else:
        ncand = v
    return StructureSpace(kind, v, OneHotBit(ncand * ncand), b=b)


def generate_synthetic(space: StructureSpace, n: int, seed: int) -> Dataset:
    """n samples labeled by the exact decoder under hidden Gaussian weights."""
    featmap = SyntheticFeatureMap(space)
    rng = np.random.default_rng(seed)
    w_star = rng.standard_normal(featmap.dim)
    samples: list[tuple[InputX, object]] = []
    for _ in range(n):
        x = InputX(bits=rng.integers(0, 2, featmap.dim).astype(np.float64))
        decoded = exact_decode(w_star, x, space, featmap)
        samples.append((x, decoded.point.output))
    return Dataset(
        samples=samples,
        space=space,
        w_star=ModelParams.from_vector(w_star),
        seed=seed,
        protocol_tag="synthetic",
    )


def audit_dataset(dataset: Dataset) -> bool:
    """Re-derive every synthetic label from the stored hidden weights."""
    if dataset.protocol_tag != "synthetic":
        raise ValueError("only synthetic datasets re-derive exactly")
    featmap = SyntheticFeatureMap(dataset.space)
    for x, y in dataset.samples:
        if exact_decode(dataset.w_star, x, dataset.space, featmap).point.output != y:
            return False
    return True


def generate_matching(v: int, n: int, noise: float, seed: int) -> Dataset:
    """Keypoint-matching samples over permutations with an affine-grid latent.

    Target clouds are the centered source clouds under a hidden grid cell and
    hidden permutation, plus Gaussian coordinate noise; descriptors carry over
    unchanged. The stored reference weights reward agreement (all entries -1),
    which recovers the hidden permutation exactly at zero noise.
    """
    if v < 2:
        raise ValueError("matching needs at least 2 keypoints")
    space = StructureSpace(Kind.PERMUTATION, v, AffineGrid())
    rng = np.random.default_rng(seed)
    samples: list[tuple[InputX, object]] = []
    for _ in range(n):
        src = rng.standard_normal((v, 2))
        desc = rng.standard_normal((v, MATCHING_DESCRIPTOR_DIM))
        perm = tuple(int(p) for p in rng.permutation(v))
        cell = int(rng.integers(0, 81))
        src_c = src - src.mean(axis=0)
        dst = np.empty_like(src)
        dst[list(perm)] = src_c @ affine_cell_matrix(cell) + noise * rng.standard_normal(
            (v, 2)
        )
        desc_dst = np.empty_like(desc)
        desc_dst[list(perm)] = desc
        x = InputX(
            keypoints=Keypoints(
                coords_src=src, coords_dst=dst, desc_src=desc, desc_dst=desc_dst
            )
        )
        samples.append((x, perm))
    w_ref = -np.ones(MATCHING_DESCRIPTOR_DIM + 1)
    return Dataset(
        samples=samples,
        space=space,
        w_star=ModelParams.from_vector(w_ref),
        seed=seed,
        protocol_tag="matching",
    )


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def _space_to_dict(space: StructureSpace) -> dict:
    latent: dict = {"type": "affine"}
    if isinstance(space.latent, OneHotBit):
        latent = {"type": "onehot", "dim": space.latent.dim}
    return {"kind": space.kind.value, "v": space.v, "b": space.b, "latent": latent}


def _space_from_dict(d: dict) -> StructureSpace:
    latent = (
        OneHotBit(d["latent"]["dim"]) if d["latent"]["type"] == "onehot" else AffineGrid()
    )
    return StructureSpace(Kind(d["kind"]), d["v"], latent, b=d["b"])


def _sample_to_dict(space: StructureSpace, x: InputX, y) -> dict:
    out: dict = {"y": output_to_text(space, y)}
    if x.bits is not None:
        out["bits"] = "".join(str(int(b)) for b in x.bits)
    if x.keypoints is not None:
        kp = x.keypoints
        out["keypoints"] = {
            "coords_src": kp.coords_src.tolist(),
            "coords_dst": kp.coords_dst.tolist(),
            "desc_src": kp.desc_src.tolist(),
            "desc_dst": kp.desc_dst.tolist(),
        }
    return out


def _sample_from_dict(space: StructureSpace, d: dict) -> tuple[InputX, object]:
    bits = None
    keypoints = None
    if "bits" in d:
        bits = np.array([float(c) for c in d["bits"]])
    if "keypoints" in d:
        kp = d["keypoints"]
        keypoints = Keypoints(
            coords_src=np.array(kp["coords_src"]),
            coords_dst=np.array(kp["coords_dst"]),
            desc_src=np.array(kp["desc_src"]),
            desc_dst=np.array(kp["desc_dst"]),
        )
    return InputX(bits=bits, keypoints=keypoints), output_from_text(space, d["y"])


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    doc = {
        "protocol": dataset.protocol_tag,
        "seed": dataset.seed,
        "space": _space_to_dict(dataset.space),
        "w_star": dataset.w_star.w.tolist(),
        "samples": [
            _sample_to_dict(dataset.space, x, y) for x, y in dataset.samples
        ],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1))


def load_dataset(path: str | Path) -> Dataset:
    doc = json.loads(Path(path).read_text())
    space = _space_from_dict(doc["space"])
    return Dataset(
        samples=[_sample_from_dict(space, d) for d in doc["samples"]],
        space=space,
        w_star=ModelParams.from_vector(np.array(doc["w_star"])),
        seed=doc["seed"],
        protocol_tag=doc["protocol"],
    )
