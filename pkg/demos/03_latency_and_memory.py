"""Warm-up schedule, fixed latency, and constant retained state.

Each step activates one deeper buffer block until, at step N, the first
denoised frame emerges; from then on the output for input i appears at step
i + N and the retained bytes never change, no matter how long the stream is.
"""

import io

from bistream import (
    ModelConfig,
    StreamSession,
    analyze,
    build_chain,
    build_wnet,
    compile_pipeline,
    init_weights,
    generate_sequence,
)

net = build_chain(3, 8, 4, skip=True)
store = init_weights(net, seed=2)
graph = compile_pipeline(net)

trace = io.StringIO()
sess = StreamSession(graph, store, trace=trace)
for fr in generate_sequence(8, 16, 16, seed=1):
    sess.step(fr)
sess.flush()

print("per-step trace (chain of 4 blocks, 8 real frames + 4 flush steps):\n")
print(trace.getvalue())

report = analyze(graph, 16, 16)
print(f"closed form: latency {report['latency']} steps, "
      f"temporal receptive field {report['receptive_field']} frames, "
      f"state {report['state_bytes']} bytes\n")

print("receptive field grows as 2N+1 with the block count:")
for n in (0, 2, 16, 24):
    if n == 16:
        g = compile_pipeline(build_wnet(ModelConfig(base_channels=8)))
    else:
        g = compile_pipeline(build_chain(3, 8, n) if n else
                             build_chain(3, 8, 2, fusion_mode="none"))
    r = analyze(g)
    print(f"  N={r['n_blocks']:2d}  RF={r['receptive_field']}")

print("\nstate bytes after each steady step, for three stream lengths:")
for t in (32, 64, 128):
    sess = StreamSession(graph, store)
    sizes = set()
    for i, fr in enumerate(generate_sequence(t, 16, 16, seed=t)):
        sess.step(fr)
        if i >= graph.n_blocks:
            sizes.add(sess.state_bytes())
    sess.flush()
    print(f"  T={t:4d}: {sorted(sizes)} (constant)")
