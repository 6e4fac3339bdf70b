"""Without transfers every gene tree is the species tree, so both methods are exact."""
from lgtrecon.harness import ExperimentConfig, run_experiment

for method in ("qp", "mt"):
    cfg = ExperimentConfig.from_dict({"seed": 1, "trials": 10, "genes": 10, "method": method,
                                      "yule": {"n": 32}, "lgt": {"lambda_bar": 0}})
    res = run_experiment(cfg)
    print(f"{method}: {res.successes}/{res.trials} exact reconstructions")
