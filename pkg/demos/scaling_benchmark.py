"""Wall-time scaling of the refiner against a quadratic attention baseline.

The state-space refiner should scale near-linearly with the number of
frames; pairwise attention scales quadratically.  Prints the measured
log-log slopes.
"""

from fsar.bench import loglog_slope, run_scale_bench

lengths = [8, 16, 32, 64, 128]
rows = run_scale_bench(lengths, dim=64, seed=0, repeats=3)

print(f"{'frames':>8}{'refiner s':>12}{'attention s':>14}")
for r in rows:
    print(f"{r['frames']:>8}{r['stpr_seconds']:>12.5f}"
          f"{r['attention_seconds']:>14.6f}")

frames = [r["frames"] for r in rows]
s_ref = loglog_slope(frames, [r["stpr_seconds"] for r in rows])
s_att = loglog_slope(frames, [r["attention_seconds"] for r in rows])
print(f"\nrefiner slope   {s_ref:.2f}  (linear would be 1.0)")
print(f"attention slope {s_att:.2f}  (quadratic would be 2.0)")
