"""Dense statevector simulation for small qubit registers.

Conventions, fixed for the whole package:

* Qubit 0 is the most significant bit of the basis-state index: for an
  N-qubit register, basis state |b0 b1 ... b(N-1)> has index
  ``sum(b_q << (N - 1 - q))``.
* ``Ry`` acts with the full-angle real rotation matrix
  ``[[cos t, -sin t], [sin t, cos t]]`` (the angle is t, not t/2).

States are dense vectors of ``2**n_qubits`` complex amplitudes.  Gates
are applied directly to the amplitude vector; no gate matrices are
built or cached here.  The array-level kernels (`ry_amplitudes`,
`cnot_amplitudes`) accept arbitrary leading batch dimensions and
preserve the input dtype, which lets circuit code evolve many
real-amplitude states at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 24

# Reject expectation values once |norm^2 - 1| drifts past this; kept an
# order looser than the 1e-10 the gate kernels are tested to hold.
NORM_DRIFT_LIMIT = 1e-8

_PARITY_CACHE: dict[int, np.ndarray] = {}


@dataclass
class Statevector:
    """Amplitudes of an ``n_qubits`` register, qubit 0 = most significant bit."""

    n_qubits: int
    amplitudes: np.ndarray

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def copy(self) -> "Statevector":
        return Statevector(self.n_qubits, self.amplitudes.copy())


def init_state(n_qubits: int) -> Statevector:
    """Prepare |0...0> on ``n_qubits`` qubits."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(2**n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(n_qubits, amps)


def ry_amplitudes(amps: np.ndarray, n_qubits: int, qubit: int, angle: float) -> np.ndarray:
    """Apply Ry(angle) on ``qubit`` to amplitudes shaped ``(..., 2**n_qubits)``."""
    lead = amps.shape[:-1]
    a = amps.reshape(lead + (2,) * n_qubits)
    axis = len(lead) + qubit
    a0 = np.take(a, 0, axis=axis)
    a1 = np.take(a, 1, axis=axis)
    c = np.cos(angle)
    s = np.sin(angle)
    out = np.stack((c * a0 - s * a1, s * a0 + c * a1), axis=axis)
    return out.reshape(amps.shape)


def cnot_amplitudes(amps: np.ndarray, n_qubits: int, control: int, target: int) -> np.ndarray:
    """Apply CNOT(control -> target) to amplitudes shaped ``(..., 2**n_qubits)``."""
    lead = amps.shape[:-1]
    src = amps.reshape(lead + (2,) * n_qubits)
    out = src.copy()
    sel = [slice(None)] * src.ndim
    sel[len(lead) + control] = 1
    # Indexing with the control bit drops that axis, so the target axis
    # shifts down by one when it sits past the control.
    t_axis = len(lead) + target
    if target > control:
        t_axis -= 1
    out[tuple(sel)] = np.flip(src[tuple(sel)], axis=t_axis)
    return out.reshape(amps.shape)


def _check_qubit(n_qubits: int, qubit: int, role: str) -> None:
    if not 0 <= qubit < n_qubits:
        raise IndexError(f"{role} qubit {qubit} out of range for {n_qubits} qubits")


def apply_ry(state: Statevector, qubit: int, angle: float) -> Statevector:
    """Rotate ``qubit`` by the full-angle Ry matrix; returns a fresh state."""
    _check_qubit(state.n_qubits, qubit, "target")
    return Statevector(state.n_qubits, ry_amplitudes(state.amplitudes, state.n_qubits, qubit, angle))


def apply_cnot(state: Statevector, control: int, target: int) -> Statevector:
    """Flip ``target`` where ``control`` is 1; returns a fresh state."""
    _check_qubit(state.n_qubits, control, "control")
    _check_qubit(state.n_qubits, target, "target")
    if control == target:
        raise IndexError(f"control and target must differ, both are {control}")
    return Statevector(
        state.n_qubits, cnot_amplitudes(state.amplitudes, state.n_qubits, control, target)
    )


def parity_signs(n_qubits: int) -> np.ndarray:
    """(-1)**popcount(index) for every basis index, as a read-only float vector."""
    cached = _PARITY_CACHE.get(n_qubits)
    if cached is None:
        idx = np.arange(2**n_qubits)
        ones = np.zeros(2**n_qubits, dtype=np.int64)
        for q in range(n_qubits):
            ones += (idx >> q) & 1
        cached = 1.0 - 2.0 * (ones % 2)
        cached.setflags(write=False)
        _PARITY_CACHE[n_qubits] = cached
    return cached


def expectation_z_all(state: Statevector) -> float:
    """Exact <Z x Z x ... x Z>: signed-parity sum over |amplitude|^2."""
    probs = np.abs(state.amplitudes) ** 2
    norm = float(probs.sum())
    if abs(norm - 1.0) > NORM_DRIFT_LIMIT:
        raise ValueError(f"state norm^2 drifted to {norm!r}; refusing to measure")
    return float(parity_signs(state.n_qubits) @ probs)
