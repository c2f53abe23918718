"""Sweep fusion weights and rerank depth on the bundled toy fixture.

Runs the weight grid and the depth comparison against the fixture's
gold references, then prints the best cells of each sweep.
"""

import argparse
import json
from pathlib import Path

from regqa.cli import main as regqa

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG = REPO_ROOT / "fixtures" / "toy" / "config.json"


def _best_rows(path: Path, by: str, top: int):
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    rows = [r for r in rows if r["record"] == "cell"]
    rows.sort(key=lambda r: -r[by])
    return rows[:top]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(DEFAULT_CONFIG))
    parser.add_argument("--out-dir", default=str(REPO_ROOT / "out" / "sweeps"))
    parser.add_argument("--step", type=float, default=0.25)
    parser.add_argument("--depths", default="1,2,5,10,50")
    parser.add_argument("--top", type=int, default=5)
    args = parser.parse_args(argv)

    common = ["--config", args.config, "--out-dir", args.out_dir]
    for step in (
        ["sweep-fusion", *common, "--step", str(args.step)],
        ["sweep-rerank-depth", *common, "--depths", args.depths],
    ):
        print(f"$ regqa {' '.join(step)}")
        code = regqa(step)
        if code != 0:
            return code

    out = Path(args.out_dir)
    print(f"\ntop fusion cells by map@k (step {args.step}):")
    for row in _best_rows(out / "sweep_fusion.jsonl", "map", args.top):
        print(
            f"  a={row['a']:.2f} b={row['b']:.2f} c={row['c']:.2f} "
            f"recall={row['recall']:.4f} map={row['map']:.4f}"
        )
    print("\nrerank depths by map@k:")
    for row in _best_rows(out / "sweep_rerank_depth.jsonl", "map", args.top):
        print(
            f"  depth={row['depth']} "
            f"recall={row['recall']:.4f} map={row['map']:.4f}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
