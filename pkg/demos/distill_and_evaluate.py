"""End-to-end comparison: plain distribution matching vs the full surgery.

Generates the four-domain toy dataset, distills with both configurations under
shared seed streams, and reports leave-one-domain-out accuracy per held-out
target. Takes a couple of minutes.
"""

from sgsdistill import (
    EvalConfig,
    ToySpec,
    config_distiller,
    generate_toy,
    mdg_protocol,
    toy_protocol_config,
)

STYLES = ["clean", "invert", "lowfreq", "checker"]

print("generating the 4-domain toy dataset (3000 samples)...")
dataset = generate_toy(ToySpec(), seed=0)

eval_cfg = EvalConfig(runs=3, epochs=400, lr=0.05, base_seed=11)
outcomes = {}
for tag, (lc, ld) in [("DM", (0.0, 0.0)), ("DM+surgery", (1.0, 1.0))]:
    cfg = toy_protocol_config(lambda_c=lc, lambda_d=ld)
    print(f"distilling + evaluating {tag} (ipc 10, {cfg.iterations} iterations, "
          f"{eval_cfg.runs} runs per target)...")
    outcomes[tag] = mdg_protocol(dataset, config_distiller(cfg), eval_cfg)

print(f"\n{'target':<10}{'DM':>12}{'DM+surgery':>14}")
for t, style in enumerate(STYLES):
    dm = outcomes["DM"].ood.target_mean(t)
    sgs = outcomes["DM+surgery"].ood.target_mean(t)
    marker = "  <-" if sgs > dm else ""
    print(f"{style:<10}{dm:>12.3f}{sgs:>14.3f}{marker}")
print(f"{'average':<10}{outcomes['DM'].ood.mean():>12.3f}"
      f"{outcomes['DM+surgery'].ood.mean():>14.3f}")
print(f"\nin-distribution: DM {outcomes['DM'].in_distribution.mean():.3f}, "
      f"DM+surgery {outcomes['DM+surgery'].in_distribution.mean():.3f}")
print("\nnote: the inverted target is hostile to any pixel-space classifier;")
print("the surgery's gains come from the other three style shifts.")
