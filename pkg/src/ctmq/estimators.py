"""Scikit-learn style estimators wrapping the census/complexity pipeline.

Fitting is the expensive, self-contained part (censusing a machine
universe or loading a precomputed table); transforming maps batches of
binary strings to complexity features.  The classes follow the sklearn
contract (``get_params``/``set_params``, fitted attributes with trailing
underscores, 2-d float outputs), so they drop into pipelines next to
ordinary feature transformers.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .census import enumerate_machines
from .complexity import CtmTable, NotInTableError, bdm, build_table
from .machine import MachineSpec
from .qsim import run_staged
from .store import load_table
from .validation import as_bit_strings

_MISSING_POLICIES = ("raise", "nan")


def _check_missing_policy(policy: str) -> None:
    if policy not in _MISSING_POLICIES:
        raise ValueError(f"missing must be one of {_MISSING_POLICIES}, got {policy!r}")


class CtmEstimator(BaseEstimator, TransformerMixin):
    """Complexity features from an exhaustive machine census.

    Parameters
    ----------
    states : int, default=2
        Machine state count of the enumerated universe.
    tape_cells : int, default=4
        Tape length; also the length of the strings the table covers.
    max_steps : int, default=50
        Step budget before a machine counts as non-halting.
    workers : int, default=1
        Worker processes for the census.
    table_path : str, optional
        Load a previously saved table instead of enumerating; the universe
        parameters above are then taken from the file.
    missing : {"raise", "nan"}, default="raise"
        What `transform` does with strings no halting machine produced.

    Attributes
    ----------
    table_ : CtmTable
        The fitted lookup table.
    spec_ : MachineSpec
        Universe the table was built from.
    halting_fraction_ : float
        Fraction of programs that halt within the step budget.
    """

    def __init__(
        self,
        states: int = 2,
        tape_cells: int = 4,
        max_steps: int = 50,
        workers: int = 1,
        table_path: str | None = None,
        missing: str = "raise",
    ):
        self.states = states
        self.tape_cells = tape_cells
        self.max_steps = max_steps
        self.workers = workers
        self.table_path = table_path
        self.missing = missing

    def fit(self, X=None, y=None):
        """Build (or load) the lookup table.  ``X`` is ignored."""
        _check_missing_policy(self.missing)
        if self.table_path is not None:
            self.table_ = load_table(self.table_path)
        else:
            spec = MachineSpec(m=self.states, c=self.tape_cells, z=self.max_steps)
            self.table_ = build_table(enumerate_machines(spec, workers=self.workers))
        self.spec_ = self.table_.spec
        self.halting_fraction_ = self.table_.halting_total / self.table_.total
        return self

    def transform(self, X) -> np.ndarray:
        """Complexity estimate in bits for each string, shape (n, 1)."""
        check_is_fitted(self, "table_")
        strings = as_bit_strings(X, length=self.spec_.c)
        out = np.empty((len(strings), 1))
        for i, s in enumerate(strings):
            try:
                out[i, 0] = self.table_.ctm(s)
            except NotInTableError:
                if self.missing == "raise":
                    raise
                out[i, 0] = np.nan
        return out

    def complexity(self, s) -> float:
        """Scalar convenience accessor for a single string."""
        return float(self.transform([s])[0, 0])


class BdmEstimator(BaseEstimator, TransformerMixin):
    """Block-decomposition complexity of strings longer than the table's.

    Parameters
    ----------
    table : CtmTable, optional
        In-memory lookup table (e.g. a fitted ``CtmEstimator().table_``).
    table_path : str, optional
        Load the table from disk instead.
    mode : {"partition", "sliding"}, default="partition"
    stride : int, default=1
        Window stride for sliding mode.
    multiplicity : bool, default=False
        Count repeated blocks once, adding log2 of their occurrence count,
        instead of summing every occurrence.
    lenient : bool, default=False
        Skip blocks absent from the table instead of raising.
    """

    def __init__(
        self,
        table: CtmTable | None = None,
        table_path: str | None = None,
        mode: str = "partition",
        stride: int = 1,
        multiplicity: bool = False,
        lenient: bool = False,
    ):
        self.table = table
        self.table_path = table_path
        self.mode = mode
        self.stride = stride
        self.multiplicity = multiplicity
        self.lenient = lenient

    def fit(self, X=None, y=None):
        if self.table is not None:
            self.table_ = self.table
        elif self.table_path is not None:
            self.table_ = load_table(self.table_path)
        else:
            raise ValueError("provide either table or table_path")
        self.block_size_ = self.table_.spec.c
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "table_")
        strings = as_bit_strings(X)
        out = np.empty((len(strings), 1))
        for i, s in enumerate(strings):
            out[i, 0] = bdm(
                s,
                self.table_,
                mode=self.mode,
                stride=self.stride,
                multiplicity=self.multiplicity,
                lenient=self.lenient,
            )
        return out


class QuantumCtmEstimator(BaseEstimator, TransformerMixin):
    """Complexity features from the simulated superposed-machine circuit.

    Runs every program of the universe in superposition for ``max_steps``
    iterations (in stages of ``stage_steps``) and estimates complexities
    from the halting-state measurement statistics.  With the exact
    permutation backend the fitted values coincide with the classical
    census route.

    Attributes
    ----------
    report_ : MeasurementReport
    p_h_ : float
        Probability of measuring the halting state.
    """

    def __init__(
        self,
        states: int = 2,
        tape_cells: int = 4,
        max_steps: int = 50,
        stage_steps: int | None = None,
        backend: str = "permutation",
        missing: str = "raise",
    ):
        self.states = states
        self.tape_cells = tape_cells
        self.max_steps = max_steps
        self.stage_steps = stage_steps
        self.backend = backend
        self.missing = missing

    def fit(self, X=None, y=None):
        _check_missing_policy(self.missing)
        spec = MachineSpec(m=self.states, c=self.tape_cells, z=self.max_steps)
        self.spec_ = spec
        self.report_ = run_staged(
            spec, z=self.max_steps, z_ch=self.stage_steps, backend=self.backend
        )
        self.p_h_ = float(self.report_.p_h)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "report_")
        strings = as_bit_strings(X, length=self.spec_.c)
        out = np.empty((len(strings), 1))
        for i, s in enumerate(strings):
            try:
                out[i, 0] = self.report_.ctm_estimate(s)
            except NotInTableError:
                if self.missing == "raise":
                    raise
                out[i, 0] = np.nan
        return out
