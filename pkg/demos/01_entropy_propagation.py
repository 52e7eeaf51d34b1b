"""How entropy moves through dense and convolutional layers.

A linear map W applied to a continuous random vector shifts its
differential entropy by log|det W|.  Rectangular weight matrices and
convolutions don't have determinants as-is, but both embed in square
matrices that do:

* a dense N x d matrix embeds in a max(N, d) square block-triangular
  matrix whose determinant equals that of the top-left square part;
* a valid 2-d convolution is a band-block-Toeplitz matrix acting on the
  flattened image, and its square embedding has determinant
  c11 ** (number of output elements).

This script walks both constructions on small concrete numbers.
"""

import numpy as np

from entroprop import (
    build_conv_matrix,
    conv2d,
    conv_entropy_delta,
    dense_entropy_delta,
    lu_logabsdet,
    square_part,
    squarify_dense,
)

np.set_printoptions(linewidth=120, suppress=True)

# --- Dense layers: squarifying a 3x5 weight matrix -----------------------

w = np.array([
    [3.0, 0.0, 9.0, -3.0, 4.0],
    [1.0, 5.0, -1.0, 4.0, 2.0],
    [0.0, 4.0, -2.0, 1.0, 5.0],
])
sq = squarify_dense(w)
print("weight matrix (3x5):")
print(w)
print("\nsquare embedding (5x5) - original rows on top, unit rows below:")
print(sq.embedded)
print("\nsquare part (top-left 3x3):")
print(sq.square_part)

ld_embedded = lu_logabsdet(sq.embedded)
ld_square = lu_logabsdet(square_part(w))
print(f"\nlog|det embedding| = {ld_embedded.log_abs:.6f}")
print(f"log|det square part| = {ld_square.log_abs:.6f}   (identical)")
print(f"dense entropy delta = {dense_entropy_delta(w).log_abs:.6f} nats "
      f"(= ln 18, det of the 3x3 part)")

# --- Convolutions as matrices --------------------------------------------

x = np.array([
    [3.0, 4.0, 1.0, 2.0],
    [0.0, 0.0, 5.0, 6.0],
    [2.0, 1.0, 0.0, 3.0],
    [1.0, 4.0, 2.0, 5.0],
])
c = np.array([
    [2.0, 1.0],
    [4.0, 3.0],
    [-2.0, 1.0],
])
z = conv2d(x, c)
print("\n\nimage X (4x4), filter C (3x2), feature map Z = C*X (2x3):")
print(z)

cm = build_conv_matrix(c, 4, 4)
print(f"\nmatrix form: C_M is {cm.matrix.shape[0]}x{cm.matrix.shape[1]}; "
      f"C_M @ flatten(X) reshaped:")
print((cm.matrix @ x.ravel()).reshape(2, 3))

det = lu_logabsdet(cm.square_embedding)
n_out = z.size
print(f"\nsquare embedding is {cm.square_embedding.shape[0]}x"
      f"{cm.square_embedding.shape[1]}, upper triangular;")
print(f"det = {det.magnitude():.1f} = c11^(out elements) = "
      f"{c[0, 0]:.0f}^{n_out} = {c[0, 0] ** n_out:.0f}")

delta = conv_entropy_delta(c, 4, 4)
print(f"conv entropy delta = {delta.delta_total:.6f} nats total "
      f"({delta.delta_per_element:.6f} per output element = ln|c11|)")

# --- The Gaussian sanity check -------------------------------------------
# For Gaussian data, entropy is (1/2) log det of (2 pi e) Sigma, so the
# entropy change across any linear map can be computed two ways.

rng = np.random.default_rng(0)
w2 = rng.normal(size=(4, 6))
emb = squarify_dense(w2).embedded
n = emb.shape[0]
a = rng.normal(size=(n, n))
sigma = a @ a.T + 0.5 * np.eye(n)
via_covariance = 0.5 * (
    lu_logabsdet(emb @ sigma @ emb.T).log_abs - lu_logabsdet(sigma).log_abs
)
via_determinant = lu_logabsdet(emb).log_abs
print("\n\nGaussian check on a random 4x6 matrix:")
print(f"  half log-det change of the covariance: {via_covariance:.10f}")
print(f"  log|det| of the square embedding:      {via_determinant:.10f}")
print(f"  difference: {abs(via_covariance - via_determinant):.2e}")
