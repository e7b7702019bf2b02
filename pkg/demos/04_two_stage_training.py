"""Train the CNN baseline, the GAN, and the polisher on a small synthetic
corpus, then compare all four methods on the held-out days.

Run:  python demos/04_two_stage_training.py
(a few minutes on one core; raise n_days and the epochs for real results)
"""
from loadsr.training import RunConfig, prepare_data, run_pipeline

cfg = RunConfig.desk(n_days=800, epochs_gan=20, epochs_polish=10, gen_features=32,
                     pol_features=16)
data = prepare_data(cfg)
print(f"{len(data.ids)} household-days: {len(data.split.train)} train, "
      f"{len(data.split.val)} val, {len(data.split.test)} test")

result = run_pipeline(cfg, data)

log = result.stage1.log
print("\nGAN training (per-epoch means):")
for row in log.rows:
    print(f"  epoch {int(row['epoch']):2d}  L_D {row['L_D']:.3f}  L_cont {row['L_cont']:.3f}  "
          f"D(real) {row['score_real']:.3f}  D(fake) {row['score_fake']:.3f}")
print("\npolishing loss per epoch:", [round(r["L_pol"], 4) for r in result.stage2.log.rows])

print("\ntest-set report (gain is relative to LERP):")
print(result.report.table())
