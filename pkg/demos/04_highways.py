"""Locate two planted highways on a balanced tree."""
from pathlib import Path

from lgtrecon.harness import load_config, run_trial

cfg = load_config(Path(__file__).parent / "configs" / "highways.yaml")
for t in range(cfg.trials):
    rec = run_trial(cfg, t)
    print(f"trial {t}: RF {rec.rf}, calls {rec.highways_called}, correct {rec.highways_correct}")
