"""Success rate of quartet plurality as the expected number of transfers grows."""
from pathlib import Path

from lgtrecon.harness import load_config, sweep

cfg = load_config(Path(__file__).parent / "configs" / "yule_qp.yaml")
cfg = cfg.with_value("N", 30)
for row in sweep(cfg.with_value("lambda", 1.0), "lambda", [0.5, 2.0, 8.0, 32.0]):
    print(f"Lambda={row['value']:>5}: success {row['success_rate']:.2f} "
          f"[{row['ci_low']:.2f}, {row['ci_high']:.2f}]")
