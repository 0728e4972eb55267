"""Regenerate the in-repo benchmark datasets (seeded, deterministic).

Run from the repository root: python datasets/make_fixtures.py
"""

from pathlib import Path

import numpy as np

from doust.data import Dataset, save_dataset

OUT = Path(__file__).resolve().parent


def blob_shift(rng):
    """10-d isotropic normals vs a cloud shifted 1.5 in every coordinate."""
    normals = rng.normal(size=(600, 10))
    anomalies = rng.normal(loc=1.5, size=(300, 10))
    return _as_dataset(normals, anomalies, "blob_shift")


def sparse_signal(rng):
    """8-d normals; anomalies shifted +3 in the first two coordinates
    only, the rest pure noise."""
    normals = rng.normal(size=(600, 8))
    anomalies = rng.normal(size=(300, 8))
    anomalies[:, :2] += 3.0
    return _as_dataset(normals, anomalies, "sparse_signal")


def cigar_offaxis(rng):
    """Elongated normal cloud (std 5 along the first axis); anomalies sit
    3 units off the second axis, inside the cloud's Euclidean footprint."""
    normals = rng.normal(size=(600, 6))
    normals[:, 0] *= 5.0
    anomalies = rng.normal(size=(300, 6))
    anomalies[:, 0] *= 5.0
    anomalies[:, 1] += 3.0
    return _as_dataset(normals, anomalies, "cigar_offaxis")


def benchmark_shift(rng):
    """Sweep fixture: 10-d unit shift, enough outliers for nu=0.5 and
    enough test normals for nu=0.01 to leave a handful of them."""
    normals = rng.normal(size=(2000, 10))
    anomalies = rng.normal(loc=1.5, size=(1000, 10))
    return _as_dataset(normals, anomalies, "benchmark_shift")


def _as_dataset(normals, anomalies, name):
    features = np.vstack([normals, anomalies])
    labels = np.concatenate(
        [np.zeros(len(normals), dtype=int), np.ones(len(anomalies), dtype=int)]
    )
    return Dataset(features, labels, name=name)


def main():
    rng = np.random.default_rng(20240901)
    for builder in (blob_shift, sparse_signal, cigar_offaxis, benchmark_shift):
        dataset = builder(rng)
        path = OUT / f"{dataset.name}.csv"
        save_dataset(dataset, path)
        print(f"wrote {path} ({dataset.n_normal} normal / {dataset.n_outliers} anomalies)")


if __name__ == "__main__":
    main()
