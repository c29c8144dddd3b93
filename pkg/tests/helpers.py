import numpy as np


def planted_two_class(n_samples, seed, shape=(8, 8), strength=1.0, noise=0.02, planted_seed=99):
    """Samples along the last mode; class 1 adds a fixed rank-1 pattern.

    Both classes share a stronger rank-3 background whose column and row
    spaces are orthogonal to the pattern, so a rank-3 first scale absorbs
    the background and leaves the pattern to the finer scale.  Returns the
    data tensor, the labels and the unit-norm pattern.
    """
    prng = np.random.default_rng(planted_seed)
    left = np.linalg.qr(prng.standard_normal((shape[0], 4)))[0]
    right = np.linalg.qr(prng.standard_normal((shape[1], 4)))[0]
    pattern = np.outer(left[:, 3], right[:, 3])
    rng = np.random.default_rng(seed)
    y = np.arange(n_samples) % 2
    x = np.empty(shape + (n_samples,))
    for m in range(n_samples):
        coef = 3.0 * rng.standard_normal((3, 3))
        x[:, :, m] = left[:, :3] @ coef @ right[:, :3].T + noise * rng.standard_normal(shape)
        x[:, :, m] += strength * y[m] * pattern
    return x, y, pattern


def planted_feature_positions(features, share=0.9):
    """Smallest set of feature columns holding ``share`` of the pattern's energy."""
    e = np.asarray(features, dtype=np.float64) ** 2
    order = np.argsort(-e, kind="stable")
    cum = np.cumsum(e[order]) / e.sum()
    return np.sort(order[: int(np.argmax(cum >= share)) + 1])


# one "PASS|FAIL <criterion>: <detail>" line per acceptance criterion
ACCEPTANCE_LINES = []


def record(criterion, passed, detail=""):
    line = f"{'PASS' if passed else 'FAIL'} {criterion}" + (f": {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed
