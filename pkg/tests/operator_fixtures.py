"""Canned operator sources shared across the sandbox/evolution/CLI tests.

The sources reference `np` directly because the worker host injects numpy
into the execution namespace; they deliberately avoid import statements so
they run identically under the stub host and a production host.
"""

import textwrap

# A well-behaved random-search operator covering all three encodings.
VALID_OPERATOR = textwrap.dedent(
    '''
    def next_generation(parents, parent_objectives, problem_meta, seed):
        """Perturb each parent a little; fall back to random resampling."""
        rng = np.random.default_rng(seed)
        n = problem_meta["n_var"]
        encoding = problem_meta["encoding"]
        offspring = []
        for parent in parents:
            if encoding == "real":
                lo = np.asarray(problem_meta["lower"], dtype=float)
                hi = np.asarray(problem_meta["upper"], dtype=float)
                child = np.asarray(parent, dtype=float) + rng.normal(0.0, 0.1, n) * (hi - lo)
                child = np.minimum(np.maximum(child, lo), hi)
            elif encoding == "bitstring":
                child = np.asarray(parent, dtype=int).copy()
                flip = rng.random(n) < max(1.0 / n, 0.05)
                child[flip] = 1 - child[flip]
            else:
                child = np.asarray(parent, dtype=int).copy()
                i, j = sorted(rng.integers(0, n, size=2).tolist())
                child[i : j + 1] = child[i : j + 1][::-1]
            offspring.append(child.tolist())
        return offspring
    '''
).strip()

# Loads fine, crashes on the first generation step.
DIV0_OPERATOR = textwrap.dedent(
    """
    def next_generation(parents, parent_objectives, problem_meta, seed):
        scale = 1 / 0
        return parents
    """
).strip()

# Loads fine, never returns.
LOOP_OPERATOR = textwrap.dedent(
    """
    def next_generation(parents, parent_objectives, problem_meta, seed):
        counter = 0
        while True:
            counter += 1
        return parents
    """
).strip()

# Fails at load time.
SYNTAX_ERROR_OPERATOR = "def next_generation(parents,:\n    return parents\n"

# Loads but defines the wrong symbol.
MISSING_FUNCTION_OPERATOR = "helper = 42\n"

# Returns one offspring too few.
WRONG_COUNT_OPERATOR = textwrap.dedent(
    """
    def next_generation(parents, parent_objectives, problem_meta, seed):
        return [list(map(float, p)) for p in parents][:-1]
    """
).strip()


def wrap_reply(source: str) -> str:
    """Package an operator source as a scripted chat response."""
    return f"Here is the corrected function.\n<next_generation>\n{source}\n</next_generation>\n"
