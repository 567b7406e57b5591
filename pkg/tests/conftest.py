"""Shared randomized fixtures for solver tests."""

import numpy as np

from stemgrow.curves import rotate_vectors
from stemgrow.reaction import ConstraintSystem, ContactSet


def random_constraint_system(rng, tip_allowed=True):
    """A smooth random curve with 1-5 contacts at random nodes.

    Node count spans 20-100 cells; normals are uniform on the sphere and the
    right-hand side is centered Gaussian, so both signs of demanded rate
    appear and active sets of every size occur.
    """
    n = int(rng.integers(20, 101))
    ds = float(rng.uniform(0.005, 0.05))
    t = n * ds
    s = np.arange(n + 1) * ds
    k0 = rng.normal(size=3)
    k0 /= np.linalg.norm(k0)
    density = rng.normal(scale=2.0, size=(n + 1, 3))
    for _ in range(3):
        density[1:-1] = (density[:-2] + density[1:-1] + density[2:]) / 3.0
    ang = np.cumsum(density, axis=0) * ds
    k = rotate_vectors(ang, np.tile(k0, (n + 1, 1)))
    steps = 0.5 * ds * (k[:-1] + k[1:])
    gamma = np.zeros((n + 1, 3))
    gamma[1:] = np.cumsum(steps, axis=0)

    m = int(rng.integers(1, 6))
    nodes = np.sort(rng.choice(np.arange(2, n + 1), size=m, replace=False))
    normals = rng.normal(size=(m, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    beta = float(rng.uniform(0.0, 2.0))
    b = rng.normal(scale=0.5, size=m)
    tip = bool(tip_allowed and nodes[-1] == n and rng.random() < 0.5)
    contacts = ContactSet(
        nodes=nodes,
        arclengths=s[nodes],
        normals=normals,
        phi=np.zeros(m),
        tip=tip,
    )
    return ConstraintSystem(
        contacts=contacts,
        gamma=gamma,
        s=s,
        ds=ds,
        t=t,
        beta=beta,
        b=b,
        weights=ds * np.exp(beta * (t - s)),
        tip_row=m - 1 if tip else None,
        tip_tangent=k[n].copy() if tip else None,
    )
