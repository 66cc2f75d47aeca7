"""Clip-edge degradation in clipped (MIMO) inference, and why streaming avoids it.

Splitting a long sequence into independent clips zero-pads each clip's
temporal context, so frames near interior clip boundaries come out different
(and worse) than the full-sequence result.  The streaming pipeline carries
its context across the old clip borders in its buffers, so it has no edges
at all: it matches the full-sequence output everywhere.
"""

import numpy as np

from bistream import (
    build_chain,
    forward_clipped_mimo,
    forward_full_sequence,
    init_weights,
    run_stream,
    generate_sequence,
)

N = 4          # buffer blocks
T = 32         # stream length
T_CLIP = 8     # clip length of the MIMO run

net = build_chain(3, 8, N, skip=True)
store = init_weights(net, seed=11)
frames = generate_sequence(T, 16, 16, seed=5)

full = forward_full_sequence(net, store, frames)
mimo = forward_clipped_mimo(net, store, frames, T_CLIP)
stream = run_stream(net, store, frames)

print(f"N={N} blocks, T={T} frames, clips of {T_CLIP}\n")
print("frame   |mimo - full|      |stream - full|   clip position")
for i in range(T):
    d_mimo = float(np.max(np.abs(mimo[i] - full[i])))
    d_stream = float(np.max(np.abs(stream[i] - full[i])))
    pos = i % T_CLIP
    marker = "<- interior clip edge zone" if d_mimo > 0 else ""
    print(f"{i:5d}   {d_mimo:<17.6g} {d_stream:<17.6g} {pos}  {marker}")

print("\nMIMO differs exactly within N frames of each interior clip border;")
print("the streaming pipeline matches the full-sequence output everywhere.")
