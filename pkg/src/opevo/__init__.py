"""Evolution of multi-objective search operators driven by a language model.

The package evolves the *variation operator* of an evolutionary algorithm as
a piece of Python source code: candidate operators are generated and
recombined by an LLM, validated and repaired in an isolated worker process,
scored over benchmark suites (continuous, knapsack, and TSP families), and
selected through a softmax over aggregate scores.
"""

__version__ = "0.1.0"
