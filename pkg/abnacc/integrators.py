import numpy as np
from scipy import sparse

class ControlGrid:

    """
    Implementation of the hat-function control basis on [0, T]: a uniform grid
    whose first and last cells are refined geometrically toward the ends, each
    cell split into RK4 steps of equal length.

    """

    def __init__(self, horizon, cells, levels=8, substeps=4):
        """
        Initialize the grid.

        :horizon: Final time T.
        :cells: Number of uniform cells.
        :levels: Number of halvings of the end cells.
        :substeps: RK4 steps per cell.

        """
        self.horizon = float(horizon)
        self.cells = int(cells)
        self.levels = int(levels)
        self.substeps = int(substeps)

        h = self.horizon / self.cells
        uniform = np.linspace(0.0, self.horizon, self.cells + 1)
        refined = h * 2.0 ** -np.arange(1, self.levels + 1)

        nodes = np.concatenate([uniform, refined, self.horizon - refined])
        self.nodes = np.unique(nodes)
        self.nodes[0], self.nodes[-1] = 0.0, self.horizon

        widths = np.diff(self.nodes)
        frac = np.arange(self.substeps) / self.substeps
        starts = (self.nodes[:-1, None] + widths[:, None] * frac).ravel()

        self.step_nodes = np.append(starts, self.horizon)
        self.step_cell = np.repeat(np.arange(len(widths)), self.substeps)
        self.step_sizes = np.diff(self.step_nodes)
        self.midpoints = self.step_nodes[:-1] + 0.5 * self.step_sizes

    @property
    def size(self):
        return len(self.nodes)

    @property
    def steps(self):
        return len(self.step_sizes)

    def hats(self, t, cell):
        """
        Values of the basis functions at times inside given cells.

        :t: Array of times.
        :cell: Array of cell indices containing the times.
        :returns: Sparse-like pair (left weights, right weights); the left one
                  belongs to node `cell`, the right one to node `cell + 1`.

        """
        lo = self.nodes[cell]
        s = (t - lo) / (self.nodes[cell + 1] - lo)

        return 1.0 - s, s

    def basis_matrix(self, t, cell):
        """
        Dense matrix of basis values at the given times.

        :t: Array of times.
        :cell: Array of cell indices containing the times.
        :returns: Array of shape (len(t), size).

        """
        left, right = self.hats(t, cell)
        out = np.zeros((len(t), self.size))
        rows = np.arange(len(t))
        out[rows, cell] = left
        out[rows, cell + 1] += right

        return out

    def gram(self):
        """
        L2 Gram matrix of the hat functions.

        :returns: Dense symmetric positive definite matrix.

        """
        w = np.diff(self.nodes)
        main = np.zeros(self.size)
        main[:-1] += w / 3.0
        main[1:] += w / 3.0

        return sparse.diags([w / 6.0, main, w / 6.0], [-1, 0, 1]).toarray()

    def interpolate(self, values, t):
        """
        Evaluate a control given by its nodal values.

        :values: Nodal values, shape (size,) or (k, size).
        :t: Array of times.
        :returns: Control values at t.

        """
        values = np.atleast_2d(values)
        out = np.stack([np.interp(t, self.nodes, v) for v in values])

        return out[0] if out.shape[0] == 1 else out

def rk4_cells(rhs, x0, durations, params, substeps):
    """
    Integrate a batch of autonomous systems over consecutive cells, each cell
    with its own constant parameters.

    :rhs: Callable rhs(x, p) -> dx/dt for states x of shape (B, n).
    :x0: Initial states, shape (B, n) (or (n,), broadcast to B = 1).
    :durations: Cell lengths, shape (K,) or (K, B).
    :params: Sequence of K per-cell parameters passed to rhs.
    :substeps: RK4 steps per cell.
    :returns: Final states, shape (B, n).

    """
    x = np.atleast_2d(np.array(x0, dtype=float))

    for duration, p in zip(durations, params):
        h = np.asarray(duration, dtype=float) / substeps
        if h.ndim:
            h = h[:, None]

        for _ in range(substeps):
            k1 = rhs(x, p)
            k2 = rhs(x + 0.5 * h * k1, p)
            k3 = rhs(x + 0.5 * h * k2, p)
            k4 = rhs(x + h * k3, p)
            x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return x
