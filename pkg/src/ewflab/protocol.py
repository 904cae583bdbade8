"""The six-subsystem nested-measurement protocol and its stage dynamics.

Subsystem order is fixed globally as (C, F1, S, F2, W1, W2) with dimensions
(2, 3, 2, 3, 3, 3); every module indexes this same 324-dimensional layout.
Basis label order is likewise fixed:

    C  : head, tail            (the coin)
    S  : up, down              (the spin; outcome labels are + for up, - for down)
    F1 : 0, head, tail         (F1's memory)
    F2 : 0, +, -               (F2's memory)
    W1 : 0, ok, fail           (W1's memory)
    W2 : 0, ok, fail           (W2's memory)

All measurements are modeled as recording unitaries that copy a basis label of
the measured factor into the recorder's memory register; no collapse happens
here.  The globally unitary evolution of the initial state through these
recorders is called the pilot state, and the outcome-extraction semantics live
in the born module.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .linalg import (
    ATOL,
    Factor,
    Projector,
    ProjectiveDecomposition,
    SpaceDescriptor,
    StateVector,
    apply_on_axes,
    basis_state,
    lifted_projector,
)

HEAD, TAIL = "head", "tail"
UP, DOWN = "up", "down"
OK, FAIL = "ok", "fail"
READY = "0"
PLUS, MINUS = "+", "-"

# Residual branch completing a two-outcome basis on a six-dimensional factor;
# it carries no amplitude anywhere in the protocol's reachable dynamics.
REST = "rest"

GLOBAL_SPACE = SpaceDescriptor(
    (
        Factor("C", (HEAD, TAIL)),
        Factor("F1", (READY, HEAD, TAIL)),
        Factor("S", (UP, DOWN)),
        Factor("F2", (READY, PLUS, MINUS)),
        Factor("W1", (READY, OK, FAIL)),
        Factor("W2", (READY, OK, FAIL)),
    )
)

DIM = GLOBAL_SPACE.size  # 324


class AgentId(enum.Enum):
    F1 = "F1"
    F2 = "F2"
    W1 = "W1"
    W2 = "W2"

    @property
    def memory_axis(self) -> int:
        return GLOBAL_SPACE.axis(self.value)


class StageId(enum.Enum):
    """Protocol stages on the canonical timeline t = -1, 0, 1, 2, 3, 4."""

    PREP_MINUS1 = -1
    OBS0 = 0
    PREP1 = 1
    OBS2 = 2
    MEAS3 = 3
    MEAS4 = 4

    @property
    def time(self) -> int:
        return self.value

    def __lt__(self, other: "StageId") -> bool:
        return self.value < other.value


STAGES: tuple[StageId, ...] = tuple(StageId)
#: Stages that apply a unitary (all but the initial preparation).
DYNAMIC_STAGES: tuple[StageId, ...] = tuple(s for s in STAGES if s is not StageId.PREP_MINUS1)


class PreconditionError(ValueError):
    """A stage map was applied to a state outside its declared domain."""


@dataclass(frozen=True, eq=False)
class MeasurementSpec:
    """One projective measurement: target factor basis plus a recorder.

    `basis` lives on the target factor subspace and always resolves the
    identity there; two-outcome measurements on six-dimensional factors carry
    an extra residual branch (label REST) that completes the decomposition but
    is not a reportable outcome.
    """

    name: str
    targets: tuple[str, ...]
    basis: ProjectiveDecomposition
    recorder: AgentId
    outcome_labels: tuple[str, ...]

    @property
    def target_axes(self) -> tuple[int, ...]:
        return tuple(GLOBAL_SPACE.axis(t) for t in self.targets)

    def factor_matrix(self, label: str) -> np.ndarray:
        """Projector matrix of one branch on the target factor."""
        p = self.basis.projector(label)
        mat = np.zeros((p.space.size, p.space.size), dtype=np.complex128)
        for v in p.vectors:
            mat += np.outer(v.amps, v.amps.conj())
        return mat

    def lifted_projector(self, label: str) -> Projector:
        vecs = [v.amps for v in self.basis.projector(label).vectors]
        return lifted_projector(GLOBAL_SPACE, self.target_axes, vecs)


@dataclass(frozen=True, eq=False)
class StageUnitary:
    """A stage's action: a unitary on a subset of tensor factors.

    `matrix` is the factor-level unitary over `axes` (ascending).  Recording
    stages carry the recorder axis so that `apply` can enforce the
    ready-memory precondition; `linear` skips that check and is the raw
    globally unitary extension.
    """

    stage: StageId
    axes: tuple[int, ...]
    matrix: np.ndarray
    recorder_axis: int | None = None

    def linear(self, state: StateVector) -> StateVector:
        out = apply_on_axes(state.amps, GLOBAL_SPACE.dims, self.axes, self.matrix)
        return StateVector(GLOBAL_SPACE, out)

    def apply(self, state: StateVector) -> StateVector:
        if self.recorder_axis is not None:
            probs = np.abs(state.amps.reshape(GLOBAL_SPACE.dims)) ** 2
            marg = probs.sum(axis=tuple(i for i in range(len(GLOBAL_SPACE.dims)) if i != self.recorder_axis))
            off_ready = float(marg[1:].sum())
            if off_ready > ATOL:
                agent = GLOBAL_SPACE.factors[self.recorder_axis].name
                raise PreconditionError(
                    f"stage {self.stage.name}: recorder {agent} memory is not ready "
                    f"(weight {off_ready:.3e} outside |0>)"
                )
        return self.linear(state)

    @cached_property
    def global_matrix(self) -> np.ndarray:
        """Dense 324x324 matrix, built column by column."""
        cols = np.zeros((DIM, DIM), dtype=np.complex128)
        eye = np.eye(DIM, dtype=np.complex128)
        for j in range(DIM):
            cols[:, j] = apply_on_axes(eye[:, j], GLOBAL_SPACE.dims, self.axes, self.matrix)
        return cols

    @cached_property
    def rewritten_memory_axes(self) -> tuple[int, ...]:
        """Memory axes whose record this stage can overwrite.

        An axis is rewritten when the stage matrix fails to commute with the
        label projectors on that axis (a diagonal control, like the spin
        preparation conditioned on F1, leaves the record intact).
        """
        memory_axes = {a.memory_axis for a in AgentId}
        rewritten = []
        for pos, axis in enumerate(self.axes):
            if axis not in memory_axes:
                continue
            dims = [GLOBAL_SPACE.dims[a] for a in self.axes]
            for k in range(dims[pos]):
                diag = np.zeros(dims, dtype=np.complex128)
                sel: list[object] = [slice(None)] * len(dims)
                sel[pos] = k
                diag[tuple(sel)] = 1.0
                pk = np.diag(diag.reshape(-1))
                if not np.allclose(self.matrix @ pk, pk @ self.matrix, atol=ATOL):
                    rewritten.append(axis)
                    break
        return tuple(rewritten)


def _memory_swap(agent: AgentId, label: str) -> np.ndarray:
    """3x3 permutation exchanging the ready state with the given memory label."""
    labels = GLOBAL_SPACE.factors[agent.memory_axis].labels
    v = np.eye(3, dtype=np.complex128)
    k = labels.index(label)
    v[[0, k]] = v[[k, 0]]
    return v


def _two_outcome_basis(
    space: SpaceDescriptor, ok_vec: dict[tuple[str, str], complex], fail_vec: dict[tuple[str, str], complex]
) -> ProjectiveDecomposition:
    """ok/fail rank-1 branches plus the rank-4 residual on a 2x3 or 3x2 factor."""

    def vec(terms: dict[tuple[str, str], complex]) -> np.ndarray:
        amps = np.zeros(space.size, dtype=np.complex128)
        for labels, c in terms.items():
            amps[space.index_of(labels)] = c
        return amps

    ok_amps, fail_amps = vec(ok_vec), vec(fail_vec)
    span = np.stack([ok_amps, fail_amps])
    rest = []
    for i in range(space.size):
        e = np.zeros(space.size, dtype=np.complex128)
        e[i] = 1.0
        resid = e - span.T @ (span.conj() @ e)
        n = np.linalg.norm(resid)
        if n > 0.5:  # basis vectors are either inside the span or orthogonal to it
            rest.append(resid / n)
    sv = lambda a: StateVector(space, a)
    return ProjectiveDecomposition(
        space,
        (
            (OK, Projector(space, (sv(ok_amps),))),
            (FAIL, Projector(space, (sv(fail_amps),))),
            (REST, Projector(space, tuple(sv(r) for r in rest))),
        ),
    )


#: Which memory register records each outcome variable, and at which stage.
RECORDERS: dict[str, tuple[AgentId, StageId]] = {
    "r": (AgentId.F1, StageId.OBS0),
    "z": (AgentId.F2, StageId.OBS2),
    "w1": (AgentId.W1, StageId.MEAS3),
    "w2": (AgentId.W2, StageId.MEAS4),
}

#: Memory label written for each outcome of each variable.
OUTCOME_LABELS: dict[str, tuple[str, ...]] = {
    "r": (HEAD, TAIL),
    "z": (PLUS, MINUS),
    "w1": (OK, FAIL),
    "w2": (OK, FAIL),
}


class Protocol:
    """One run configuration: coin amplitudes plus optional corruption hooks.

    The corruption hooks exist for verification tests only: `flip_ok_sign`
    negates the entangled ok basis vector of W1's measurement (probabilities
    are unchanged, coefficient checks must catch it) and `corrupt_preparation`
    flips a sign inside the tail-branch spin rotation (probabilities change,
    every downstream consumer must refuse or fail loudly).
    """

    def __init__(
        self,
        coin_amplitudes: tuple[float, float] | None = None,
        *,
        flip_ok_sign: bool = False,
        corrupt_preparation: bool = False,
    ) -> None:
        if coin_amplitudes is None:
            coin_amplitudes = (math.sqrt(1.0 / 3.0), math.sqrt(2.0 / 3.0))
        a, b = complex(coin_amplitudes[0]), complex(coin_amplitudes[1])
        if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > 1e-9:
            raise ValueError("coin amplitudes must satisfy |a|^2 + |b|^2 = 1 within 1e-9")
        self.coin_amplitudes = (a, b)
        self.flip_ok_sign = flip_ok_sign
        self.corrupt_preparation = corrupt_preparation
        self._pilot_cache: dict[StageId, StateVector] = {}

    # -- measurement specs ------------------------------------------------

    @cached_property
    def coin_measurement(self) -> MeasurementSpec:
        space = GLOBAL_SPACE.subspace(("C",))
        branches = tuple(
            (label, Projector(space, (basis_state(space, (label,)),))) for label in (HEAD, TAIL)
        )
        return MeasurementSpec(
            "r", ("C",), ProjectiveDecomposition(space, branches), AgentId.F1, (HEAD, TAIL)
        )

    @cached_property
    def spin_measurement(self) -> MeasurementSpec:
        space = GLOBAL_SPACE.subspace(("S",))
        branches = (
            (PLUS, Projector(space, (basis_state(space, (UP,)),))),
            (MINUS, Projector(space, (basis_state(space, (DOWN,)),))),
        )
        return MeasurementSpec(
            "z", ("S",), ProjectiveDecomposition(space, branches), AgentId.F2, (PLUS, MINUS)
        )

    @cached_property
    def friend_coin_measurement(self) -> MeasurementSpec:
        """W1's entangled ok/fail measurement of the coin together with F1."""
        space = GLOBAL_SPACE.subspace(("C", "F1"))
        s = 1.0 / math.sqrt(2.0)
        sign = -1.0 if self.flip_ok_sign else 1.0
        basis = _two_outcome_basis(
            space,
            {(HEAD, HEAD): sign * s, (TAIL, TAIL): -sign * s},
            {(HEAD, HEAD): s, (TAIL, TAIL): s},
        )
        return MeasurementSpec("w1", ("C", "F1"), basis, AgentId.W1, (OK, FAIL))

    @cached_property
    def friend_spin_measurement(self) -> MeasurementSpec:
        """W2's entangled ok/fail measurement of the spin together with F2."""
        space = GLOBAL_SPACE.subspace(("S", "F2"))
        s = 1.0 / math.sqrt(2.0)
        basis = _two_outcome_basis(
            space,
            {(DOWN, MINUS): s, (UP, PLUS): -s},
            {(DOWN, MINUS): s, (UP, PLUS): s},
        )
        return MeasurementSpec("w2", ("S", "F2"), basis, AgentId.W2, (OK, FAIL))

    def measurement(self, var: str) -> MeasurementSpec:
        try:
            return {
                "r": self.coin_measurement,
                "z": self.spin_measurement,
                "w1": self.friend_coin_measurement,
                "w2": self.friend_spin_measurement,
            }[var]
        except KeyError:
            raise KeyError(f"unknown outcome variable {var!r}") from None

    # -- stage dynamics ----------------------------------------------------

    def initial_state(self) -> StateVector:
        """Coin superposition, spin down, all four memories ready."""
        a, b = self.coin_amplitudes
        amps = np.zeros(DIM, dtype=np.complex128)
        amps[GLOBAL_SPACE.index_of((HEAD, READY, DOWN, READY, READY, READY))] = a
        amps[GLOBAL_SPACE.index_of((TAIL, READY, DOWN, READY, READY, READY))] = b
        return StateVector(GLOBAL_SPACE, amps).require_normalized(1e-9)

    def record_isometry(self, agent: AgentId, spec: MeasurementSpec) -> StageUnitary:
        """Unitary copying the measured basis label into the agent's memory.

        On the reachable subspace (agent memory ready) this maps every basis-k
        component psi_k (x) |0> to psi_k (x) |label_k>; the residual branch is
        extended as the identity on the memory, which is one valid unitary
        extension off the reachable subspace.
        """
        if spec.recorder is not agent:
            raise ValueError(f"measurement {spec.name!r} is recorded by {spec.recorder.value}, not {agent.value}")
        mem_axis = agent.memory_axis
        axes = tuple(sorted(spec.target_axes + (mem_axis,)))
        if axes != spec.target_axes + (mem_axis,):
            raise ValueError("recorder memory axis must follow the target axes in global order")
        d_target = math.prod(GLOBAL_SPACE.dims[a] for a in spec.target_axes)
        mat = np.zeros((d_target * 3, d_target * 3), dtype=np.complex128)
        for label in spec.basis.labels:
            p = spec.factor_matrix(label)
            if label == REST:
                v = np.eye(3, dtype=np.complex128)
            else:
                v = _memory_swap(agent, label)
            mat += np.kron(p, v)
        stage = RECORDERS[spec.name][1]
        return StageUnitary(stage, axes, mat, recorder_axis=mem_axis)

    def preparation_unitary(self) -> StageUnitary:
        """Spin preparation controlled on F1's memory.

        The head component leaves the spin down; the tail component rotates
        down into the equal superposition (up + down)/sqrt(2).
        """
        s = 1.0 / math.sqrt(2.0)
        rot = np.array([[s, s], [-s, s]], dtype=np.complex128)  # columns: up -> (up-down)/sqrt2, down -> (up+down)/sqrt2
        if self.corrupt_preparation:
            rot = np.array([[s, s], [s, -s]], dtype=np.complex128)
        eye = np.eye(2, dtype=np.complex128)
        mat = np.zeros((6, 6), dtype=np.complex128)
        for k, u in enumerate((eye, eye, rot)):  # F1 = 0, head, tail
            e = np.zeros((3, 3), dtype=np.complex128)
            e[k, k] = 1.0
            mat += np.kron(e, u)
        return StageUnitary(StageId.PREP1, (1, 2), mat)

    @cached_property
    def stage_unitaries(self) -> dict[StageId, StageUnitary]:
        return {
            StageId.OBS0: self.record_isometry(AgentId.F1, self.coin_measurement),
            StageId.PREP1: self.preparation_unitary(),
            StageId.OBS2: self.record_isometry(AgentId.F2, self.spin_measurement),
            StageId.MEAS3: self.record_isometry(AgentId.W1, self.friend_coin_measurement),
            StageId.MEAS4: self.record_isometry(AgentId.W2, self.friend_spin_measurement),
        }

    def stage_unitary(self, stage: StageId) -> StageUnitary:
        return self.stage_unitaries[stage]

    def pilot_state_after(self, stage: StageId) -> StateVector:
        """Global unitary evolution of the initial state up to and including stage."""
        if stage not in self._pilot_cache:
            state = self.initial_state()
            for s in DYNAMIC_STAGES:
                if s.value > stage.value:
                    break
                state = self.stage_unitaries[s].apply(state)
                self._pilot_cache[s] = state
            self._pilot_cache[StageId.PREP_MINUS1] = self.initial_state()
        return self._pilot_cache[stage]

    def pilot_state_with_order(self, order: tuple[StageId, ...]) -> StateVector:
        """Pilot state after running the dynamic stages in a custom order."""
        state = self.initial_state()
        for s in order:
            state = self.stage_unitaries[s].linear(state)
        return state

    # -- record access -----------------------------------------------------

    def record_projector(self, var: str, label: str) -> Projector:
        """Global projector onto one memory label of var's recorder."""
        agent, _ = RECORDERS[var]
        axis = agent.memory_axis
        idx = GLOBAL_SPACE.factors[axis].index(label)
        e = np.zeros(3, dtype=np.complex128)
        e[idx] = 1.0
        return lifted_projector(GLOBAL_SPACE, (axis,), [e])

    def record_weights(self, state: StateVector, vars: tuple[str, ...]) -> dict[tuple[str, ...], float]:
        """Joint Born weights of memory labels for the given outcome variables.

        Label tuples run over the declared outcome labels only; the ready
        label 0 is excluded (callers read records after they are written).
        """
        probs = (np.abs(state.amps) ** 2).reshape(GLOBAL_SPACE.dims)
        axes = tuple(RECORDERS[v][0].memory_axis for v in vars)
        sorted_axes = tuple(sorted(axes))
        marg = probs.sum(axis=tuple(i for i in range(len(GLOBAL_SPACE.dims)) if i not in sorted_axes))
        pos = {a: i for i, a in enumerate(sorted_axes)}
        out: dict[tuple[str, ...], float] = {}
        for combo in np.ndindex(*[3] * len(axes)):
            labels = tuple(
                GLOBAL_SPACE.factors[axis].labels[i] for axis, i in zip(axes, combo)
            )
            if any(label == READY for label in labels):
                continue
            idx = [0] * len(axes)
            for var_i, axis in enumerate(axes):
                idx[pos[axis]] = combo[var_i]
            out[labels] = float(marg[tuple(idx)])
        return out


def default_protocol() -> Protocol:
    return Protocol()
