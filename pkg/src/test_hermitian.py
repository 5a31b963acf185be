#!/usr/bin/env python
"""Tests for the dense Hermitian kernels"""
import numpy as np
import pytest

from pyfive.exceptions import NotPositiveDefiniteError, SingularTriangularError
from pyfive.hermitian import (cholesky, eig_hermitian, smallest_eigenpair, solve_upper_triangular,
                              apply_inverse_hermitian_transpose, characteristic_eigenvalues, hermitian_part)


def random_hermitian(rng, m, shift=0.0):
    b = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return (b + b.conj().T) / 2 + shift * np.eye(m)


def random_pd(rng, m, eps=1e-3):
    b = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return b.conj().T @ b + eps * np.eye(m)


def random_triangular(rng, m):
    q = np.triu(rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)))
    q[np.diag_indices(m)] = 1.0 + rng.uniform(size=m)
    return q


def test_cholesky_simple():
    assert np.allclose(cholesky(np.eye(3)), np.eye(3))
    assert np.allclose(cholesky(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


def test_cholesky_reconstruction():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = random_pd(rng, 5)
        q = cholesky(a)
        assert np.allclose(q, np.triu(q))
        assert np.all(np.real(np.diag(q)) > 0)
        assert np.allclose(np.imag(np.diag(q)), 0)
        assert np.linalg.norm(q.conj().T @ q - a) <= 1e-10 * np.linalg.norm(a)


def test_cholesky_stack():
    rng = np.random.default_rng(2)
    stack = np.array([random_pd(rng, 3) for _ in range(7)])
    q = cholesky(stack)
    assert q.shape == (7, 3, 3)
    for a, factor in zip(stack, q):
        assert np.allclose(factor.conj().T @ factor, a, atol=1e-10)


def test_cholesky_not_positive_definite():
    with pytest.raises(NotPositiveDefiniteError) as info:
        cholesky(np.diag([1.0, -1.0, 2.0]))
    assert info.value.pivot == 1
    # rank one: second pivot is zero up to rounding
    v = np.array([1.0, 2.0])
    with pytest.raises(NotPositiveDefiniteError) as info:
        cholesky(np.outer(v, v))
    assert info.value.pivot == 1


def test_cholesky_failure_names_matrix():
    stack = np.array([np.eye(2), np.eye(2), np.diag([1.0, 0.0])])
    with pytest.raises(NotPositiveDefiniteError) as info:
        cholesky(stack)
    assert info.value.bin == 2


def test_hermitian_part_rejects_non_hermitian():
    with pytest.raises(ValueError):
        hermitian_part(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_eig_simple():
    values, vectors = eig_hermitian(np.eye(3))
    assert np.allclose(values, 1.0)
    values, vectors = eig_hermitian(np.diag([1.0, 3.0]))
    assert np.allclose(values, [3.0, 1.0])
    assert np.allclose(np.abs(vectors), [[0.0, 1.0], [1.0, 0.0]])


def test_eig_invariants():
    rng = np.random.default_rng(3)
    for m in range(1, 9):
        a = random_hermitian(rng, m)
        values, vectors = eig_hermitian(a)
        assert np.all(np.diff(values) <= 0)
        assert np.allclose(vectors.conj().T @ vectors, np.eye(m), atol=1e-10)
        scale = np.linalg.norm(a, 2)
        for k in range(m):
            assert np.linalg.norm(a @ vectors[:, k] - values[k] * vectors[:, k]) <= 1e-10 * scale
        assert abs(np.sum(values) - np.real(np.trace(a))) <= 1e-10 * max(1.0, np.sum(np.abs(values)))



def test_eig_tiny_perturbation():
    rng = np.random.default_rng(8)
    unitary, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
    a = unitary @ np.diag([4.0, 3.0, 2.0, 1.0]) @ unitary.conj().T
    a = (a + a.conj().T) / 2
    e = random_hermitian(rng, 4)
    e *= 1e-15 / np.linalg.norm(e, 2)
    values, vectors = eig_hermitian(a)
    perturbed_values, perturbed_vectors = eig_hermitian(a + e)
    assert np.max(np.abs(values - perturbed_values)) <= 1e-13
    for k in range(4):
        assert abs(abs(np.vdot(vectors[:, k], perturbed_vectors[:, k])) - 1.0) <= 1e-12

def test_eig_phase_convention():
    rng = np.random.default_rng(4)
    _, vectors = eig_hermitian(random_hermitian(rng, 4))
    for k in range(4):
        peak = vectors[np.argmax(np.abs(vectors[:, k])), k]
        assert abs(peak.imag) < 1e-12 and peak.real > 0


@pytest.mark.parametrize('m', [1, 2, 3])
def test_eig_matches_characteristic_polynomial(m):
    rng = np.random.default_rng(10 + m)
    for _ in range(25):
        a = random_hermitian(rng, m)
        values, _ = eig_hermitian(a)
        assert np.allclose(values, characteristic_eigenvalues(a), rtol=0, atol=1e-10)


@pytest.mark.slow
def test_eig_characteristic_polynomial_batch():
    rng = np.random.default_rng(5)
    for ii in range(1000):
        a = random_hermitian(rng, 1 + ii % 3)
        assert np.allclose(eig_hermitian(a).eigenvalues, characteristic_eigenvalues(a), rtol=0, atol=1e-10)


def test_smallest_eigenpair():
    value, vector = smallest_eigenpair(np.diag([5.0, 2.0, 7.0]))
    assert value == pytest.approx(2.0)
    assert np.allclose(np.abs(vector), [0.0, 1.0, 0.0])
    value, vector = smallest_eigenpair(np.eye(3))
    assert value == pytest.approx(1.0)
    assert np.linalg.norm(np.eye(3) @ vector - vector) <= 1e-10
    rng = np.random.default_rng(6)
    a = random_hermitian(rng, 6)
    value, vector = smallest_eigenpair(a)
    assert abs(value - np.min(np.linalg.eigvalsh(a))) <= 1e-12 * np.linalg.norm(a, 2)


def test_solve_upper_triangular():
    b = np.array([1.0 + 2j, 3.0])
    assert np.allclose(solve_upper_triangular(np.eye(2), b), b)
    assert np.allclose(solve_upper_triangular(np.diag([2.0, 4.0]), np.array([2.0, 8.0])), [1.0, 2.0])
    rng = np.random.default_rng(7)
    q = random_triangular(rng, 8)
    b = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    x = solve_upper_triangular(q, b)
    assert np.linalg.norm(q @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_apply_inverse_hermitian_transpose():
    x = np.array([4.0, 4.0])
    assert np.allclose(apply_inverse_hermitian_transpose(np.eye(2), x), x)
    assert np.allclose(apply_inverse_hermitian_transpose(2 * np.eye(2), x), [2.0, 2.0])
    rng = np.random.default_rng(8)
    q = random_triangular(rng, 5)
    x = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    y = apply_inverse_hermitian_transpose(q, x)
    assert np.linalg.norm(q.conj().T @ y - x) <= 1e-10 * np.linalg.norm(x)


def test_triangular_solves_on_stacks():
    rng = np.random.default_rng(9)
    q = np.array([random_triangular(rng, 3) for _ in range(4)])
    vectors = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    blocks = rng.standard_normal((4, 3, 6)) + 1j * rng.standard_normal((4, 3, 6))
    x = solve_upper_triangular(q, vectors)
    y = apply_inverse_hermitian_transpose(q, blocks)
    for f in range(4):
        assert np.allclose(q[f] @ x[f], vectors[f])
        assert np.allclose(q[f].conj().T @ y[f], blocks[f])


def test_singular_triangular():
    with pytest.raises(SingularTriangularError):
        solve_upper_triangular(np.diag([1.0, 0.0]), np.ones(2))


def test_whitening_identity():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((3, 256)) + 1j * rng.standard_normal((3, 256))
    x[1] += 0.5 * x[0]
    cov = x @ x.conj().T / 256
    q = cholesky(cov)
    white = apply_inverse_hermitian_transpose(q, x)
    assert np.linalg.norm(white @ white.conj().T / 256 - np.eye(3)) <= 1e-8


if __name__ == '__main__':
    from argparse import ArgumentParser
    parser = ArgumentParser()
    parser.add_argument('--m', type=int, default=3, help='matrix size')
    parser.add_argument('--seed', type=int, default=0)
    args = parser.parse_args()
    a = random_hermitian(np.random.default_rng(args.seed), args.m)
    print('eigh:   ', eig_hermitian(a).eigenvalues)
    print('charpoly', characteristic_eigenvalues(a))
