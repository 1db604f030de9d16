import numpy as np


def taylor_expm(mat: np.ndarray) -> np.ndarray:
    """Scaling-and-squaring truncated-Taylor matrix exponential.

    Independent oracle for the eigendecomposition evolution path: scale
    the matrix by 2^-k until its norm is small, sum the Taylor series to
    machine convergence, then square k times.
    """
    mat = np.asarray(mat, dtype=complex)
    norm = np.linalg.norm(mat, ord=np.inf)
    k = max(0, int(np.ceil(np.log2(max(norm, 1e-300)))) + 1)
    scaled = mat / (2.0**k)
    dim = mat.shape[0]
    result = np.eye(dim, dtype=complex)
    term = np.eye(dim, dtype=complex)
    for order in range(1, 60):
        term = term @ scaled / order
        result = result + term
        if np.linalg.norm(term, ord=np.inf) < 1e-20:
            break
    for _ in range(k):
        result = result @ result
    return result


def random_pauli_sum(rng, n, include_y=False):
    """Random real-weighted Pauli sum for property tests."""
    from qrcvol.quantum import PauliString, PauliSum

    symbols = "IXYZ" if include_y else "IXZ"
    terms = []
    for _ in range(rng.integers(1, 6)):
        ops = "".join(rng.choice(list(symbols)) for _ in range(n))
        if set(ops) == {"I"}:
            continue
        terms.append((float(rng.normal()), PauliString(ops)))
    if not terms:
        terms = [(1.0, PauliString("X" + "I" * (n - 1)))]
    return PauliSum(n, terms)


def random_state(rng, n):
    from qrcvol.quantum import StateVector

    amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    amps /= np.linalg.norm(amps)
    return StateVector(amps, n)
