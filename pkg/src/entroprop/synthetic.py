"""Synthetic image corpora in the MNIST / CIFAR-10 file formats.

Each class is a smooth random blob prototype; samples are shifted,
rescaled, noised copies, so the data carries both class structure (for
classifiers) and a translation manifold that reconstruction models keep
grinding on for many epochs.  Generators are fully seeded.  The writers
emit real IDX / CIFAR-10 binary files so the standard loaders exercise
the same code paths as with the original datasets.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .datasets import MNIST_FILES, write_cifar10, write_idx

N_CLASSES = 10


def _class_prototypes(rng: np.random.Generator, channels: int, size: int) -> np.ndarray:
    """(classes, channels, size, size) smooth bump mixtures in [0, 1]."""
    yy, xx = np.mgrid[0:size, 0:size]
    protos = np.zeros((N_CLASSES, channels, size, size))
    for cls in range(N_CLASSES):
        for ch in range(channels):
            img = np.zeros((size, size))
            # Bumps may sit anywhere in the frame so every pixel region,
            # including the top rows, carries class-bearing signal.
            for _ in range(rng.integers(4, 8)):
                cy, cx = rng.uniform(size * 0.05, size * 0.95, size=2)
                sy, sx = rng.uniform(size * 0.08, size * 0.3, size=2)
                amp = rng.uniform(0.35, 1.0)
                img += amp * np.exp(
                    -((yy - cy) ** 2) / (2 * sy**2) - ((xx - cx) ** 2) / (2 * sx**2)
                )
            peak = img.max()
            if peak > 0:
                img *= 0.9 / peak
            protos[cls, ch] = img
    return protos


def make_images(n: int, channels: int, size: int, seed: int,
                max_shift: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """n samples cycling through the 10 classes.

    Returns uint8 images (n, channels, size, size) and int labels.
    Per sample: an integer translation of the class prototype, a
    brightness factor, and pixel noise, clipped to [0, 1].
    """
    rng = np.random.default_rng([seed, 17])
    protos = _class_prototypes(rng, channels, size)
    labels = np.arange(n) % N_CLASSES
    images = np.empty((n, channels, size, size), dtype=np.uint8)
    shifts = rng.integers(-max_shift, max_shift + 1, size=(n, 2))
    brightness = rng.uniform(0.7, 1.1, size=n)
    noise = rng.normal(0.0, 0.05, size=(n, channels, size, size))
    for i in range(n):
        img = np.roll(protos[labels[i]], tuple(shifts[i]), axis=(1, 2))
        img = np.clip(brightness[i] * img + noise[i], 0.0, 1.0)
        images[i] = np.round(img * 255.0).astype(np.uint8)
    return images, labels.astype(np.int64)


def write_synthetic_mnist(data_dir, n_train: int, n_test: int, seed: int = 0) -> None:
    """Write a grayscale 28x28 corpus as the four conventional IDX files."""
    base = Path(data_dir)
    base.mkdir(parents=True, exist_ok=True)
    for split, n, offset in (("train", n_train, 0), ("validation", n_test, 1)):
        images, labels = make_images(n, 1, 28, seed + offset)
        image_name, label_name = MNIST_FILES[split]
        write_idx(base / image_name, images[:, 0])
        write_idx(base / label_name, labels.astype(np.uint8))


def write_synthetic_cifar10(data_dir, n_train: int, n_test: int, seed: int = 0) -> None:
    """Write an RGB 32x32 corpus as CIFAR-10 binary batches."""
    base = Path(data_dir)
    base.mkdir(parents=True, exist_ok=True)
    train_images, train_labels = make_images(n_train, 3, 32, seed)
    write_cifar10(base / "data_batch_1.bin", train_images, train_labels)
    test_images, test_labels = make_images(n_test, 3, 32, seed + 1)
    write_cifar10(base / "test_batch.bin", test_images, test_labels)
