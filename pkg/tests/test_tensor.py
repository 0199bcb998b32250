import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbound.errors import DimensionError, StateError, TruncationError
from qbound.tensor import (
    LocalChannel,
    QuantumState,
    SystemLayout,
    TruncationSpec,
    apply_local_channel,
    basis_state,
    dephasing_channel,
    depolarizing_channel,
    diagonal_state,
    local_energies,
    marginal_tail_mass,
    maximally_mixed,
    mix,
    partial_trace,
    purify,
    random_local_channel,
    tensor_product,
    trace_distance,
    trace_norm_difference,
    truncate_state,
)


def qubit(probs, label="A"):
    return diagonal_state(SystemLayout.from_dims([len(probs)], [label]), probs)


def bell():
    psi = np.zeros(4)
    psi[[0, 3]] = 1 / np.sqrt(2)
    return QuantumState.from_vector(SystemLayout.from_dims([2, 2]), psi)


def ghz(n, d):
    psi = np.zeros(d**n)
    for i in range(d):
        psi[sum(i * d**k for k in range(n))] = 1 / np.sqrt(d)
    return QuantumState.from_vector(SystemLayout.from_dims([d] * n), psi)


def random_density(rng, dims, rank=None):
    n = int(np.prod(dims))
    rank = rank or n
    g = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    rho = g @ g.conj().T
    return QuantumState(SystemLayout.from_dims(dims), rho / np.trace(rho).real)


def oracle_partial_trace(mat, dims, keep):
    # brute-force contraction over the traced indices
    n = len(dims)
    t = mat.reshape(list(dims) * 2)
    traced = [k for k in range(n) if k not in keep]
    for k in sorted(traced, reverse=True):
        t = np.trace(t, axis1=k, axis2=k + t.ndim // 2)
    d = int(np.prod([dims[k] for k in keep]))
    return t.reshape(d, d)


# --------------------------------------------------------------------------
# layout and state validation
# --------------------------------------------------------------------------


def test_layout_defaults_and_validation():
    lay = SystemLayout.from_dims([2, 3, 4])
    assert lay.labels == ("A1", "A2", "A3")
    assert lay.total_dim == 24
    assert lay.constrained == 3
    with pytest.raises(DimensionError):
        SystemLayout.from_dims([2, 0])
    with pytest.raises(DimensionError):
        SystemLayout.from_dims([2, 2], ["A", "A"])
    with pytest.raises(DimensionError):
        SystemLayout.from_dims([2, 2], constrained=3)


def test_state_rejects_non_density_matrices():
    lay = SystemLayout.from_dims([2])
    with pytest.raises(StateError):
        QuantumState(lay, np.diag([0.6, 0.6]))
    with pytest.raises(StateError):
        QuantumState(lay, np.array([[0.5, 0.5], [0.0, 0.5]]))
    with pytest.raises(StateError):
        QuantumState(lay, np.diag([1.2, -0.2]))
    with pytest.raises(DimensionError):
        QuantumState(lay, np.eye(3) / 3)


def test_small_negative_eigenvalues_clamped():
    lay = SystemLayout.from_dims([2])
    rho = QuantumState(lay, np.diag([1.0 + 5e-10, -5e-10]))
    assert rho.eigenvalues().min() == 0.0


# --------------------------------------------------------------------------
# tensor product and partial trace
# --------------------------------------------------------------------------


def test_tensor_product_examples():
    a = maximally_mixed(SystemLayout.from_dims([2], ["A"]))
    b = maximally_mixed(SystemLayout.from_dims([2], ["B"]))
    assert np.abs(tensor_product([a, b]).matrix - np.eye(4) / 4).max() < 1e-15

    zero = basis_state(SystemLayout.from_dims([2], ["A"]), [0])
    one = basis_state(SystemLayout.from_dims([2], ["B"]), [1])
    target = np.zeros((4, 4))
    target[1, 1] = 1
    assert np.abs(tensor_product([zero, one]).matrix - target).max() < 1e-15

    prod = tensor_product([qubit([0.5, 0.5], "A"), qubit([0.25, 0.75], "B")])
    assert np.abs(np.diag(prod.matrix) - [0.125, 0.375, 0.125, 0.375]).max() < 1e-15
    assert prod.layout.labels == ("A", "B")


def test_tensor_product_renames_clashing_labels():
    prod = tensor_product([qubit([1, 0]), qubit([0, 1])])
    assert len(set(prod.layout.labels)) == 2


def test_tensor_product_dimension_cap():
    big = maximally_mixed(SystemLayout.from_dims([64], ["A"]))
    with pytest.raises(DimensionError):
        tensor_product([big, maximally_mixed(SystemLayout.from_dims([128], ["B"]))])


def test_partial_trace_examples():
    b = bell()
    assert np.abs(partial_trace(b, ["A1"]).matrix - np.eye(2) / 2).max() < 1e-15
    g = ghz(3, 3)
    assert np.abs(partial_trace(g, ["A2"]).matrix - np.eye(3) / 3).max() < 1e-15
    ra, rb = qubit([0.3, 0.7], "A"), qubit([0.9, 0.1], "B")
    assert np.abs(partial_trace(tensor_product([ra, rb]), ["A"]).matrix - ra.matrix).max() < 1e-15


def test_partial_trace_unknown_label():
    with pytest.raises(DimensionError):
        partial_trace(bell(), ["Z"])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), keep=st.sets(st.integers(0, 2), min_size=1, max_size=3))
def test_partial_trace_matches_oracle(seed, keep):
    rng = np.random.default_rng(seed)
    dims = [2, 3, 2]
    rho = random_density(rng, dims)
    labels = [rho.layout.labels[k] for k in sorted(keep)]
    ours = partial_trace(rho, labels).matrix
    ref = oracle_partial_trace(rho.matrix, dims, sorted(keep))
    assert np.abs(ours - ref).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_partial_trace_same_for_factor_dense_sparse(seed):
    rng = np.random.default_rng(seed)
    lay = SystemLayout.from_dims([2, 3, 2])
    f = rng.standard_normal((12, 3)) + 1j * rng.standard_normal((12, 3))
    fac = QuantumState.from_factor(lay, f / np.linalg.norm(f))
    dense = QuantumState(lay, fac.matrix)
    sparse = QuantumState(lay, fac.to_sparse())
    for keep in (["A1"], ["A1", "A3"], ["A2", "A3"]):
        ref = partial_trace(dense, keep).matrix
        assert np.abs(partial_trace(fac, keep).matrix - ref).max() < 1e-12
        assert np.abs(partial_trace(sparse, keep).matrix - ref).max() < 1e-12


# --------------------------------------------------------------------------
# trace distance
# --------------------------------------------------------------------------


def test_trace_distance_examples():
    r = qubit([0.5, 0.5])
    assert trace_distance(r, r) == 0.0
    assert abs(trace_distance(qubit([1, 0]), qubit([0, 1])) - 1) < 1e-15
    assert abs(trace_distance(r, qubit([0.25, 0.75])) - 0.25) < 1e-15


def test_trace_distance_layout_mismatch():
    with pytest.raises(DimensionError):
        trace_distance(qubit([1, 0]), qubit([1, 0, 0]))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_trace_distance_metric_properties(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_density(rng, [2, 2], rank=int(rng.integers(1, 5))) for _ in range(3))
    dab, dbc, dac = trace_distance(a, b), trace_distance(b, c), trace_distance(a, c)
    assert 0 <= dab <= 1
    assert abs(dab - trace_distance(b, a)) < 1e-12
    assert dac <= dab + dbc + 1e-12
    ref = 0.5 * np.abs(np.linalg.eigvalsh(a.matrix - b.matrix)).sum()
    assert abs(dab - ref) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_trace_norm_factor_path_matches_dense(seed):
    rng = np.random.default_rng(seed)
    lay = SystemLayout.from_dims([3, 3])
    fa = rng.standard_normal((9, 2)) + 1j * rng.standard_normal((9, 2))
    fb = rng.standard_normal((9, 3)) + 1j * rng.standard_normal((9, 3))
    a = QuantumState.from_factor(lay, fa / np.linalg.norm(fa))
    b = QuantumState.from_factor(lay, fb / np.linalg.norm(fb))
    ref = np.abs(np.linalg.eigvalsh(a.matrix - b.matrix)).sum()
    assert abs(trace_norm_difference(a, b) - ref) < 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_trace_distance_contracts_under_channels(seed):
    rng = np.random.default_rng(seed)
    a, b = random_density(rng, [2, 3]), random_density(rng, [2, 3])
    ch = random_local_channel(rng, [2, 3])
    assert trace_distance(apply_local_channel(ch, a), apply_local_channel(ch, b)) <= trace_distance(a, b) + 1e-12


# --------------------------------------------------------------------------
# purification
# --------------------------------------------------------------------------


def test_purify_pure_state_has_trivial_reference():
    p = purify(qubit([1.0, 0.0]))
    assert p.layout.dims == (2, 1)
    assert np.abs(partial_trace(p, ["A"]).matrix - np.diag([1.0, 0.0])).max() < 1e-15


def test_purify_maximally_mixed_gives_bell_type():
    p = purify(qubit([0.5, 0.5]))
    assert abs(p.eigenvalues().max() - 1) < 1e-12
    assert np.abs(partial_trace(p, ["A"]).matrix - np.eye(2) / 2).max() < 1e-15


def test_purify_schmidt_coefficients():
    p = purify(qubit([0.25, 0.75]))
    assert np.abs(partial_trace(p, ["A"]).matrix - np.diag([0.25, 0.75])).max() < 1e-15
    schmidt = np.sort(partial_trace(p, ["R"]).eigenvalues())
    assert np.abs(schmidt - [0.25, 0.75]).max() < 1e-15


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_purify_marginal_roundtrip(seed):
    rho = random_density(np.random.default_rng(seed), [2, 2], rank=3)
    p = purify(rho)
    assert p.layout.dims[-1] == 3
    assert np.abs(partial_trace(p, ["A1", "A2"]).matrix - rho.matrix).max() < 1e-12


# --------------------------------------------------------------------------
# channels
# --------------------------------------------------------------------------


def test_identity_channel_is_noop():
    rho = random_density(np.random.default_rng(1), [2, 3])
    out = apply_local_channel(LocalChannel.identity([2, 3]), rho)
    assert np.abs(out.matrix - rho.matrix).max() < 1e-15


def test_depolarizing_gives_maximally_mixed_product():
    rho = random_density(np.random.default_rng(2), [2, 3])
    ch = LocalChannel((depolarizing_channel(2), depolarizing_channel(3)))
    assert np.abs(apply_local_channel(ch, rho).matrix - np.eye(6) / 6).max() < 1e-15


def test_dephasing_one_half_of_bell():
    ch = LocalChannel((dephasing_channel(2), (np.eye(2),)))
    out = apply_local_channel(ch, bell()).matrix
    assert np.abs(out - np.diag([0.5, 0, 0, 0.5])).max() < 1e-15


def test_channel_factor_and_dense_paths_agree():
    rng = np.random.default_rng(3)
    lay = SystemLayout.from_dims([2, 3])
    f = rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))
    fac = QuantumState.from_factor(lay, f / np.linalg.norm(f))
    ch = random_local_channel(rng, [2, 3], env=3)
    a = apply_local_channel(ch, fac).matrix
    b = apply_local_channel(ch, QuantumState(lay, fac.matrix)).matrix
    assert np.abs(a - b).max() < 1e-13


def test_non_trace_preserving_kraus_rejected():
    with pytest.raises(StateError):
        LocalChannel(((np.eye(2) * 0.5,),))


def test_channel_dimension_mismatch():
    with pytest.raises(DimensionError):
        apply_local_channel(LocalChannel.identity([3, 2]), bell())


# --------------------------------------------------------------------------
# mixtures and truncation
# --------------------------------------------------------------------------


def test_mix_factor_states_matches_dense_sum():
    lay = SystemLayout.from_dims([2, 2])
    a, b = basis_state(lay, [0, 0]), bell()
    m = mix([a, b], [0.3, 0.7])
    assert np.abs(m.matrix - (0.3 * a.matrix + 0.7 * b.matrix)).max() < 1e-15


def test_truncate_inside_cutoff_is_identity():
    lay = SystemLayout.from_dims([3, 3])
    rho = diagonal_state(lay, [0.5, 0.5, 0, 0, 0, 0, 0, 0, 0])
    out, mass = truncate_state(rho, TruncationSpec((2, 2)))
    assert abs(mass - 1) < 1e-15
    assert np.abs(out.matrix - rho.matrix).max() < 1e-15


def test_truncate_two_level_gibbs():
    out, mass = truncate_state(qubit([0.75, 0.25]), TruncationSpec((1,)), hamiltonians=[[0.0, 1.0]])
    assert abs(mass - 0.75) < 1e-15
    assert np.abs(out.matrix - np.diag([1.0, 0.0])).max() < 1e-15


def test_truncate_zero_mass_raises():
    with pytest.raises(TruncationError):
        truncate_state(qubit([0.0, 1.0]), TruncationSpec((1,)))


def test_local_energies_and_tail_mass():
    lay = SystemLayout.from_dims([3, 2])
    rho = tensor_product([qubit([0.5, 0.3, 0.2], "A"), qubit([0.9, 0.1], "B")])
    e = local_energies(rho, [[0.0, 1.0, 2.0], [0.0, 5.0]])
    assert abs(e[0] - 0.7) < 1e-15 and abs(e[1] - 0.5) < 1e-15
    assert abs(marginal_tail_mass(rho, 0, 2) - 0.2) < 1e-15
    assert rho.layout.dims == lay.dims
