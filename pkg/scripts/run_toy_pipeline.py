"""Run the full pipeline on the bundled toy fixture.

Retrieves, generates with the chosen strategy, scores the answers, and
prints the summary plus the concatenation-exploit audit. All providers
are the deterministic offline mocks configured in the fixture.
"""

import argparse
import json
from pathlib import Path

from regqa.cli import main as regqa

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG = REPO_ROOT / "fixtures" / "toy" / "config.json"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(DEFAULT_CONFIG))
    parser.add_argument("--out-dir", default=str(REPO_ROOT / "out" / "toy"))
    parser.add_argument(
        "--strategy", choices=["noc", "loc", "vrr", "baseline"], default="vrr"
    )
    args = parser.parse_args(argv)

    common = ["--config", args.config, "--out-dir", args.out_dir]
    for step in (
        ["retrieve", *common],
        ["generate", *common, "--strategy", args.strategy],
        ["score", *common, "--answers", str(Path(args.out_dir) / "answers.jsonl")],
        ["audit-metric", *common, "--run", str(Path(args.out_dir) / "retrieval.run")],
    ):
        print(f"$ regqa {' '.join(step)}")
        code = regqa(step)
        if code != 0:
            return code

    summary = json.loads(
        (Path(args.out_dir) / "repass_summary.json").read_text()
    )
    print(f"\nstrategy={args.strategy} n_scored={summary['n_scored']}")
    for name, value in summary["mean"].items():
        print(f"  mean {name}: {value:.4f}")
    audit = json.loads((Path(args.out_dir) / "audit_metric.json").read_text())
    print(
        f"  exploit mean: {audit['mean_repass']:.4f} "
        f"(metric_gamed={audit['metric_gamed']})"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
