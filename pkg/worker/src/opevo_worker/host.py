"""Operator-host runtime.

Loads one generated ``next_generation`` function into a restricted
namespace and serves generation steps over line-delimited JSON on
stdin/stdout. One process hosts one operator for its lifetime; anything
the operator does wrong becomes a structured error reply — the serving
loop itself never crashes.

The import surface available to operator code is deliberately small
(``math``, ``random``, ``statistics``, ``numpy``). The filter is a
guard against accidental dependencies, not a security boundary.
"""

import builtins
import hashlib
import json
import math
import random
import statistics
import sys
import traceback
from dataclasses import dataclass

import numpy as np

ALLOWED_IMPORTS = ("math", "random", "statistics", "numpy")

OPERATOR_FILENAME = "<operator>"  # appears in tracebacks, keyed to source lines


class ValidationError(Exception):
    """The operator's return value violates the offspring contract."""


def _guarded_import(name, globals=None, locals=None, fromlist=(), level=0):
    if level == 0 and name.split(".")[0] in ALLOWED_IMPORTS:
        return builtins.__import__(name, globals, locals, fromlist, level)
    raise ImportError(
        f"import of {name!r} is not allowed in operator code; "
        f"allowed modules: {', '.join(ALLOWED_IMPORTS)}"
    )


def operator_namespace() -> dict:
    """Fresh globals for one operator: numeric/random stdlib plus numpy."""
    ns_builtins = dict(vars(builtins))
    ns_builtins["__import__"] = _guarded_import
    return {
        "__builtins__": ns_builtins,
        "__name__": "operator",
        "math": math,
        "random": random,
        "statistics": statistics,
        "np": np,
        "numpy": np,
    }


@dataclass(frozen=True)
class LoadedOperator:
    """A compiled operator: the callable plus a hash of the exact source."""

    fn: object
    source_hash: str

    @classmethod
    def from_source(cls, source: str) -> "LoadedOperator":
        namespace = operator_namespace()
        code = compile(source, OPERATOR_FILENAME, "exec")
        exec(code, namespace)
        fn = namespace.get("next_generation")
        if fn is None:
            raise ValueError("next_generation not found in operator source")
        if not callable(fn):
            raise ValueError("next_generation is not callable")
        return cls(fn=fn, source_hash=hashlib.sha256(source.encode("utf-8")).hexdigest())


def coerce_offspring(genomes, meta: dict, expected: int) -> list[list]:
    """Validate one step's return value and normalize it for the wire.

    Reals are clipped into [lower, upper] (overshoot is routine for
    generated operators); bit values are coerced to 0/1 by thresholding
    at 0.5; permutations must already be exact and are rejected
    otherwise, since silently repairing them would mask operator bugs.
    """
    try:
        genomes = list(genomes)
    except TypeError:
        raise ValidationError(
            f"offspring must be a sequence of genomes, got {type(genomes).__name__}"
        ) from None
    if len(genomes) != expected:
        raise ValidationError(f"expected {expected} offspring, got {len(genomes)}")
    n_var = int(meta["n_var"])
    encoding = meta["encoding"]
    out = []
    for idx, genome in enumerate(genomes):
        arr = np.asarray(genome)
        if arr.shape != (n_var,):
            raise ValidationError(
                f"offspring {idx} has shape {arr.shape}, expected ({n_var},)"
            )
        if encoding in ("real", "bitstring"):
            try:
                arr = arr.astype(float)
            except (TypeError, ValueError):
                raise ValidationError(f"offspring {idx} is not numeric") from None
        if encoding == "real":
            if np.isnan(arr).any():
                raise ValidationError(f"offspring {idx} contains NaN")
            arr = np.clip(arr, meta["lower"], meta["upper"])
            out.append([float(v) for v in arr])
        elif encoding == "bitstring":
            if not np.isfinite(arr).all():
                raise ValidationError(f"offspring {idx} contains non-finite values")
            out.append([int(v >= 0.5) for v in arr])
        elif encoding == "permutation":
            try:
                fractional = np.mod(arr.astype(float), 1.0)
            except (TypeError, ValueError):
                raise ValidationError(f"offspring {idx} is not numeric") from None
            if np.isnan(fractional).any() or (fractional != 0).any():
                raise ValidationError(f"offspring {idx} has non-integer entries")
            perm = arr.astype(int)
            if sorted(perm.tolist()) != list(range(n_var)):
                raise ValidationError(
                    f"offspring {idx} is not a permutation of 0..{n_var - 1}"
                )
            out.append([int(v) for v in perm])
        else:
            raise ValidationError(f"unknown encoding {encoding!r}")
    return out


# ---------------------------------------------------------------------------
# Protocol
# ---------------------------------------------------------------------------


@dataclass
class Session:
    operator: LoadedOperator | None = None
    meta: dict | None = None


def _error_reply(phase: str, exc: BaseException) -> dict:
    return {
        "type": "error",
        "phase": phase,
        "message": f"{type(exc).__name__}: {exc}",
        "traceback": traceback.format_exc(),
    }


def _step(session: Session, msg: dict) -> list[list]:
    seed = int(msg["seed"])
    random.seed(seed)
    np.random.seed(seed % 2**32)
    parents = [np.asarray(p) for p in msg["parents"]]
    objectives = [[float(v) for v in row] for row in msg["parent_objectives"]]
    raw = session.operator.fn(parents, objectives, dict(session.meta), seed)
    return coerce_offspring(raw, session.meta, expected=len(parents))


def handle_message(session: Session, msg: dict) -> dict | None:
    """One request to one reply; None means shutdown."""
    kind = msg.get("type")
    if kind == "shutdown":
        return None
    if kind == "load":
        try:
            meta = dict(msg["problem_meta"])
            operator = LoadedOperator.from_source(str(msg["operator_source"]))
        except Exception as exc:
            session.operator = None
            return _error_reply("load", exc)
        session.operator, session.meta = operator, meta
        return {"type": "ready"}
    if kind == "step":
        try:
            if session.operator is None:
                raise RuntimeError("step received before a successful load")
            return {"type": "offspring", "genomes": _step(session, msg)}
        except Exception as exc:
            return _error_reply("step", exc)
    return _error_reply("protocol", ValueError(f"unknown message type {kind!r}"))


def serve(stdin=None, stdout=None) -> int:
    """Read requests line by line, write one reply line each, until shutdown."""
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    session = Session()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
            if not isinstance(msg, dict):
                raise ValueError(f"expected a JSON object, got {type(msg).__name__}")
        except Exception as exc:
            reply = _error_reply("protocol", exc)
        else:
            reply = handle_message(session, msg)
            if reply is None:
                break
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()
    return 0
