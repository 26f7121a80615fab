"""End-to-end demo of the operator-evolution pipeline, fully offline.

Builds a corpus of scripted backend replies (hand-written knapsack
operators), generates a 2-instance validation suite, evolves operators
against the mock backend using the real worker process, and renders the
run report. Everything lands under the --workdir.
"""

import argparse
import json
import shutil
import sys
import textwrap
from pathlib import Path

import numpy as np

from opevo import cli
from opevo import problems as P

BITFLIP = '''
def next_generation(parents, parent_objectives, problem_meta, seed):
    """Independent per-bit flips at rate 1/n."""
    rng = np.random.default_rng(seed)
    n = problem_meta["n_var"]
    offspring = []
    for parent in parents:
        child = np.asarray(parent, dtype=int).copy()
        flip = rng.random(n) < 1.0 / n
        child[flip] = 1 - child[flip]
        offspring.append(child.tolist())
    return offspring
'''

GREEDY_BIAS = '''
def next_generation(parents, parent_objectives, problem_meta, seed):
    """Bias flips toward items with high profit density."""
    rng = np.random.default_rng(seed)
    weights = np.asarray(problem_meta["weights"], dtype=float)
    density = 1.0 / (weights + 1.0)
    p_in = 0.5 * density / density.max()
    offspring = []
    for parent in parents:
        child = np.asarray(parent, dtype=int).copy()
        gain = rng.random(len(child)) < p_in
        drop = rng.random(len(child)) < 0.05
        child[gain] = 1
        child[drop] = 0
        offspring.append(child.tolist())
    return offspring
'''

UNIFORM_MIX = '''
def next_generation(parents, parent_objectives, problem_meta, seed):
    """Uniform crossover between random parent pairs plus a light flip."""
    rng = np.random.default_rng(seed)
    n = problem_meta["n_var"]
    pool = [np.asarray(p, dtype=int) for p in parents]
    offspring = []
    for i in range(len(pool)):
        a = pool[i]
        b = pool[rng.integers(0, len(pool))]
        mask = rng.random(n) < 0.5
        child = np.where(mask, a, b)
        flip = rng.random(n) < 0.02
        child[flip] = 1 - child[flip]
        offspring.append(child.tolist())
    return offspring
'''

RANK_SAMPLER = '''
def next_generation(parents, parent_objectives, problem_meta, seed):
    """Resample bits from the frequency profile of the better half."""
    rng = np.random.default_rng(seed)
    F = np.asarray(parent_objectives, dtype=float)
    order = np.argsort(F.sum(axis=1))
    top = [np.asarray(parents[i], dtype=float) for i in order[: max(2, len(order) // 2)]]
    profile = np.clip(np.mean(top, axis=0), 0.05, 0.95)
    offspring = []
    for _ in parents:
        child = (rng.random(len(profile)) < profile).astype(int)
        offspring.append(child.tolist())
    return offspring
'''

SOURCES = [BITFLIP, GREEDY_BIAS, UNIFORM_MIX, RANK_SAMPLER]


def wrap(source, blurb):
    return f"{blurb}\n<next_generation>\n{textwrap.dedent(source).strip()}\n</next_generation>\n"


def write_fixtures(root: Path):
    plan = {
        "initialization": [wrap(s, "Here is a fresh operator.") for s in SOURCES],
        "crossover": [
            wrap(SOURCES[i % len(SOURCES)], "Combining the strengths of the given operators.")
            for i in range(8)
        ],
        "mutation": [
            wrap(SOURCES[(i + 1) % len(SOURCES)], "A mutated variant of the operator.")
            for i in range(8)
        ],
        "repair": [wrap(BITFLIP, "Fixed the reported error.") for _ in range(4)],
    }
    for kind, texts in plan.items():
        d = root / kind
        d.mkdir(parents=True)
        for i, text in enumerate(texts):
            (d / f"{i:02d}.txt").write_text(text, encoding="utf-8")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", type=Path, default=Path("demo-run"))
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--fresh", action="store_true", help="wipe the workdir first")
    args = ap.parse_args()

    work = args.workdir
    if args.fresh and work.exists():
        shutil.rmtree(work)
    work.mkdir(parents=True, exist_ok=True)

    write_fixtures(work / "fixtures")
    rng = np.random.default_rng(args.seed)
    suite = P.SuiteSpec(
        category=P.MOKP,
        role="validation",
        instances=[P.generate_mokp(30, 2, rng, instance_id=f"val-{i:02d}") for i in range(2)],
    )
    cli.save_suite(suite, work / "suite")

    config = {
        "schema_version": 1,
        "category": P.MOKP,
        "seed": args.seed,
        "evolution": {
            "n_ev": 4,
            "g_ev": 2,
            "population_size": 30,
            "generations": 30,
            "n_trial": 2,
            "max_attempts": 3,
        },
        "backend": {"kind": "mock", "fixture_dir": "fixtures"},
        "suite": {"path": "suite"},
    }
    (work / "config.json").write_text(json.dumps(config, indent=2))

    run_dir = work / "run"
    for argv in (
        ["evolve", "--config", str(work / "config.json"), "--out", str(run_dir)],
        ["report", "--run", str(run_dir)],
    ):
        print(f"$ opevo {' '.join(argv)}")
        code = cli.main(argv)
        if code != 0:
            return code

    print()
    print((run_dir / "report" / "convergence.csv").read_text().strip())
    ops_dir = run_dir / "operators"
    n_ops = sum(1 for _ in ops_dir.rglob("*.src"))
    print(f"\n{n_ops} operator sources under {ops_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
