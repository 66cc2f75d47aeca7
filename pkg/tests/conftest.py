import numpy as np


def random_frames(t, channels, height, width, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    return [rng.random((channels, height, width)).astype(np.float32) for _ in range(t)]


def assert_bitwise(a_frames, b_frames):
    assert len(a_frames) == len(b_frames)
    for i, (a, b) in enumerate(zip(a_frames, b_frames)):
        assert a.shape == b.shape, f"frame {i}: {a.shape} vs {b.shape}"
        assert np.array_equal(a, b), \
            f"frame {i} differs, max abs {np.max(np.abs(a - b))}"


def randomize_biases(store, seed):
    """He init zeroes biases; some edge-semantics tests need them nonzero.
    Positive values keep a zero input frame's conv features alive through
    relu6 in every channel."""
    rng = np.random.Generator(np.random.PCG64(seed))
    for w in store.values():
        w.bias[:] = rng.uniform(0.02, 0.1, w.bias.shape).astype(np.float32)


def changed_outputs(run, frames, j, delta=0.25, base=None):
    """Output indices that change when input frame j is perturbed.

    The perturbation is a seeded random positive field rather than a constant
    so it cannot be swallowed whole by a relu6 clamp region."""
    if base is None:
        base = run(frames)
    rng = np.random.Generator(np.random.PCG64(987654 + j))
    mod = [f.copy() for f in frames]
    mod[j] = mod[j] + np.float32(delta) * (0.5 + rng.random(mod[j].shape, dtype=np.float32))
    alt = run(mod)
    return [i for i in range(len(base)) if not np.array_equal(base[i], alt[i])]
