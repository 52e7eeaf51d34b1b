"""Training an autoencoder with the dense entropy term engaged.

Whether the stabilized dense term does anything at all depends on where
log|det| of the encoder's square part sits relative to ln(eps): at
standard Glorot scale a 64-wide square part starts near -60 nats, so
the term's gradient underflows against the task gradient and training
is bit-identical to the baseline.  Scaling the init so log|det| starts
near ln(eps) engages the term, which then visibly pushes the
determinant up and perturbs the trajectory.

This run compares three configurations on a small synthetic corpus.
"""

import numpy as np

from entroprop import LambdaSchedule, LossForm, TrainConfig, lu_logabsdet, square_part
from entroprop.synthetic import make_images
from entroprop.training import train_autoencoder

LATENT = 64

images, _ = make_images(1400, 1, 28, seed=7)
x = images.reshape(len(images), -1) / 255.0
train_x, val_x = x[:1200], x[1200:]


def run(lam, init_scale):
    cfg = TrainConfig(
        schedule=LambdaSchedule(dense_default=lam),
        form=LossForm.reciprocal(1e-4),
        entropy_loss_layers=frozenset({1}),
        max_epochs=12,
        seed=3,
        init_scale=init_scale,
    )
    res = train_autoencoder(cfg, train_x, val_x, LATENT)
    logdet = lu_logabsdet(square_part(res.weights[0].w)).log_abs
    return res, logdet


print(f"{'config':<34} {'stop':>5} {'final val MSE':>14} {'log|det Ws|':>12}")
for label, lam, scale in (
    ("baseline (lambda=0)", 0.0, 1.0),
    ("lambda=1e-2, standard init", 1e-2, 1.0),
    ("lambda=1e-2, engaged init (x2.2)", 1e-2, 2.2),
):
    res, logdet = run(lam, scale)
    print(f"{label:<34} {res.stopping_epoch:>5} {res.val_metric[-1]:>14.6f} "
          f"{logdet:>12.1f}")

base, _ = run(0.0, 1.0)
std, _ = run(1e-2, 1.0)
identical = all(
    a is None and b is None or np.array_equal(a.w, b.w)
    for a, b in zip(base.weights, std.weights)
)
print(f"\nstandard-init lambda=1e-2 weights bitwise equal to baseline: "
      f"{identical}")
print("engaged init starts log|det| near ln(eps); the term then holds it "
      "far above the baseline's value while the task still trains.")
print("per-epoch validation MSE of the engaged run:")
print("  " + " ".join(f"{v:.4f}" for v in run(1e-2, 2.2)[0].val_metric))
