import numpy as np
from django.test import SimpleTestCase

from core import autograd as ag


def sample_matrix(rows=3, cols=4, seed=0):
    return np.random.default_rng(seed).normal(size=(rows, cols))


def numeric_grad(fn, x, step=1e-6):
    """Central differences of scalar fn(array) with respect to x."""
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        original = x[index]
        x[index] = original + step
        upper = fn(x)
        x[index] = original - step
        lower = fn(x)
        x[index] = original
        grad[index] = (upper - lower) / (2 * step)
    return grad


class ForwardTests(SimpleTestCase):
    """Test forward values of the tensor operations."""

    def test_matmul_values(self):
        """Test matmul of small matrices."""
        a = ag.tensor([[1.0, 2.0], [3.0, 4.0]])
        b = ag.tensor([[5.0], [6.0]])

        np.testing.assert_array_equal((a @ b).data, [[17.0], [39.0]])

    def test_matmul_inner_dimension_mismatch(self):
        """Test matmul rejects mismatched inner dimensions."""
        with self.assertRaises(ag.ShapeError):
            ag.tensor(np.ones((2, 3))) @ ag.tensor(np.ones((2, 3)))

    def test_add_requires_same_shape(self):
        """Test elementwise add does not broadcast."""
        with self.assertRaises(ag.ShapeError):
            ag.tensor(np.ones((2, 3))) + ag.tensor(np.ones((1, 3)))

    def test_softmax_rows_sum_to_one(self):
        """Test softmax rows are distributions, even for large inputs."""
        x = ag.tensor([[1000.0, 1000.0], [0.0, -1000.0]])
        y = ag.softmax_rows(x).data

        np.testing.assert_allclose(y.sum(axis=1), [1.0, 1.0])
        np.testing.assert_allclose(y[0], [0.5, 0.5])

    def test_log_softmax_matches_log_of_softmax(self):
        """Test log_softmax_rows equals log(softmax_rows)."""
        x = ag.tensor(sample_matrix())

        np.testing.assert_allclose(
            ag.log_softmax_rows(x).data, np.log(ag.softmax_rows(x).data))

    def test_l2_normalize_rows_unit_norm(self):
        """Test normalized rows have unit length."""
        y = ag.l2_normalize_rows(ag.tensor(sample_matrix())).data

        np.testing.assert_allclose(np.linalg.norm(y, axis=1), np.ones(3))

    def test_l2_normalize_zero_row_passes_through(self):
        """Test a zero row stays zero instead of dividing by zero."""
        x = ag.tensor([[0.0, 0.0], [3.0, 4.0]], requires_grad=True)
        y = ag.l2_normalize_rows(x)
        ag.total(y).backward()

        np.testing.assert_array_equal(y.data[0], [0.0, 0.0])
        np.testing.assert_allclose(y.data[1], [0.6, 0.8])
        self.assertTrue(np.all(np.isfinite(x.grad)))

    def test_take_rows_out_of_range(self):
        """Test gathering a missing row fails."""
        with self.assertRaises(ag.ShapeError):
            ag.take_rows(ag.tensor(np.ones((3, 2))), [0, 3])

    def test_slice_out_of_range(self):
        """Test slicing past the end fails."""
        with self.assertRaises(ag.ShapeError):
            ag.slice_rows(ag.tensor(np.ones((3, 2))), 1, 4)

    def test_log_of_zero_is_non_finite(self):
        """Test a NaN/Inf result raises and names the input."""
        x = ag.tensor([[0.0, 1.0]], name='probs')

        with self.assertRaises(ag.NonFiniteError) as ctx:
            ag.log(x)
        self.assertIn('probs', str(ctx.exception))

    def test_item_requires_single_element(self):
        """Test item() on a matrix fails."""
        with self.assertRaises(ag.ShapeError):
            ag.tensor(np.ones((2, 2))).item()


class BackwardTests(SimpleTestCase):
    """Test analytic gradients against finite differences."""

    def assert_gradient(self, op, shape=(3, 4), seed=0):
        x0 = np.random.default_rng(seed).normal(size=shape)
        weights = np.random.default_rng(seed + 1).normal(
            size=op(ag.tensor(x0)).shape)

        def scalar(arr):
            return float((op(ag.tensor(arr)).data * weights).sum())

        x = ag.tensor(x0.copy(), requires_grad=True)
        ag.total(op(x) * ag.constant(weights)).backward()

        np.testing.assert_allclose(
            x.grad, numeric_grad(scalar, x0.copy()), rtol=1e-5, atol=1e-7)

    def test_matmul_gradient(self):
        """Test matmul gradient with respect to the left operand."""
        w = sample_matrix(4, 2, seed=5)
        self.assert_gradient(lambda x: x @ ag.constant(w))

    def test_transpose_gradient(self):
        """Test transpose gradient."""
        self.assert_gradient(ag.transpose)

    def test_mean_gradient(self):
        """Test mean over rows and over columns."""
        self.assert_gradient(lambda x: ag.mean(x, axis=0))
        self.assert_gradient(lambda x: ag.mean(x, axis=1))

    def test_softmax_gradient(self):
        """Test softmax_rows gradient."""
        self.assert_gradient(ag.softmax_rows)

    def test_log_softmax_gradient(self):
        """Test log_softmax_rows gradient."""
        self.assert_gradient(ag.log_softmax_rows)

    def test_l2_normalize_gradient(self):
        """Test l2_normalize_rows gradient."""
        self.assert_gradient(ag.l2_normalize_rows)

    def test_exp_gradient(self):
        """Test exp gradient."""
        self.assert_gradient(ag.exp)

    def test_concat_and_slice_gradient(self):
        """Test gradients through concat and column slices."""
        self.assert_gradient(
            lambda x: ag.concat([ag.slice_cols(x, 2, 4), x], axis=1))

    def test_take_rows_accumulates_repeats(self):
        """Test repeated ids add their gradients."""
        table = ag.tensor(np.zeros((3, 2)), requires_grad=True)
        ag.total(ag.take_rows(table, [0, 2, 0])).backward()

        np.testing.assert_array_equal(table.grad, [[2, 2], [0, 0], [1, 1]])

    def test_shared_input_accumulates(self):
        """Test a tensor used twice receives the sum of both paths."""
        x = ag.tensor([[2.0]], requires_grad=True)
        ag.total(x * x + x).backward()

        np.testing.assert_allclose(x.grad, [[5.0]])

    def test_backward_needs_scalar(self):
        """Test backward on a matrix is a contract error."""
        x = ag.tensor(np.ones((2, 2)), requires_grad=True)

        with self.assertRaises(ag.GraphError):
            (x * 2.0).backward()

    def test_graph_released_after_backward(self):
        """Test the graph is freed unless retain_graph is set."""
        x = ag.tensor([[1.0, 2.0]], requires_grad=True)
        loss = ag.total(x * 3.0)
        loss.backward(retain_graph=True)
        loss.backward()

        np.testing.assert_allclose(x.grad, [[6.0, 6.0]])
        self.assertIsNone(loss.creator)

    def test_no_grad_records_nothing(self):
        """Test operations inside no_grad build no graph."""
        x = ag.tensor([[1.0]], requires_grad=True)
        with ag.no_grad():
            y = x * 2.0
        self.assertFalse(y.requires_grad)
        self.assertIsNone(y.creator)
        self.assertTrue(ag.is_grad_enabled())
