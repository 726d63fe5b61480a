"""Compare inference plans for a 451-frame video.

The hybrid coarse-to-fine plan covers the video in 33 calls with a
dependency chain of depth 4; dense sliding-window generation needs 30
calls chained 30 deep, so late frames sit behind a long chain of
generated guides.  The infilling-only variant is forced to a coarsest
interval of 225 because every window must span a full parent gap.
"""

from vidpaint.planner import (chain_depth, format_plan_table, plan_dense,
                              plan_hybrid, plan_infill_only)

LENGTH, FRAMES = 451, 16

hybrid = plan_hybrid(LENGTH, FRAMES, (30, 15, 1))
print(format_plan_table(hybrid))

print()
dense = plan_dense(LENGTH, FRAMES)
print(f"dense: calls={dense.num_calls} chain_depth={chain_depth(dense)}")

infill = plan_infill_only(LENGTH, FRAMES, (15, 1))
print(f"infill-only: coarsest interval {infill.levels[0]} "
      f"(vs {hybrid.levels[0]} for hybrid), calls={infill.num_calls}, "
      f"chain_depth={chain_depth(infill)}")
print(f"  first call covers frames {infill.calls[0].indices} "
      f"- keyframes {infill.levels[0]} apart")

print("\ndepth growth with video length (hybrid vs dense):")
for length in (451, 901, 1801):
    h = plan_hybrid(length, FRAMES, (30, 15, 1))
    d = plan_dense(length, FRAMES)
    print(f"  L={length:5d}  hybrid {h.num_calls:3d} calls depth "
          f"{chain_depth(h)}   dense {d.num_calls:3d} calls depth {chain_depth(d)}")
