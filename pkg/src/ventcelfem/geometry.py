"""Analytic descriptions of smooth domain boundaries.

A boundary is a record of vectorized closures: signed distance (negative
inside the domain), orthogonal projection onto the boundary, outward unit
normal, and the Weingarten map (Hessian of the signed distance).  Keeping
the geometry analytic removes boundary approximation as an error source
when studying mesh-order effects.

Only the unit circle ships.  Any other smooth boundary can be plugged in
by providing the same closures, e.g. from a level set with Newton-based
projection; see :class:`SmoothBoundary` for the contract each closure
must satisfy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class GeometryError(ValueError):
    """Raised for geometry queries outside their domain of validity."""


@dataclass(frozen=True)
class SmoothBoundary:
    """Capability record for a smooth closed boundary in the plane.

    All closures accept arrays of shape (..., 2) and broadcast.

    Attributes
    ----------
    signed_distance : callable
        ``d(x)``, negative inside the domain, zero on the boundary,
        positive outside; shape (..., 2) -> (...).
    project_raw : callable
        Orthogonal projection onto the boundary, valid inside the
        tubular neighborhood; no domain checks (use :meth:`project`).
    normal : callable
        Outward unit normal at boundary points; also valid off the
        boundary as the normal extension (the gradient of ``d``).
    weingarten : callable or None
        Hessian of the signed distance, shape (..., 2) -> (..., 2, 2).
        When None, :meth:`projection_jacobian` falls back to central
        finite differences.
    tubular_width : float
        Half-width of the neighborhood where the signed distance is
        smooth; mesh construction validates against it.
    projection_valid : callable or None
        Mask of points where the projection is single-valued.  None
        means the conservative default ``|d| < tubular_width``; the unit
        disk overrides it with its exact uniqueness region (everything
        but the center).  Queries outside the region are hard errors,
        never silently clamped.
    """

    signed_distance: Callable[[np.ndarray], np.ndarray]
    project_raw: Callable[[np.ndarray], np.ndarray]
    normal: Callable[[np.ndarray], np.ndarray]
    weingarten: Optional[Callable[[np.ndarray], np.ndarray]]
    tubular_width: float
    projection_valid: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def project(self, x: np.ndarray) -> np.ndarray:
        """Orthogonal projection of ``x`` onto the boundary.

        Raises
        ------
        GeometryError
            If any point lies outside the projection's uniqueness
            region; the message names the offending distance.
        """
        x = np.asarray(x, dtype=float)
        d = self.signed_distance(x)
        if self.projection_valid is None:
            bad = np.abs(d) >= self.tubular_width
        else:
            bad = ~self.projection_valid(x)
        if np.any(bad):
            d_bad = np.atleast_1d(d)[np.atleast_1d(bad)]
            worst = float(d_bad[np.argmax(np.abs(d_bad))])
            raise GeometryError(
                f"projection undefined at signed distance {worst:.6g} "
                "(outside the uniqueness region of the boundary projection)"
            )
        return self.project_raw(x)

    def projection_jacobian(self, x: np.ndarray, step: float = 1e-7) -> np.ndarray:
        """Differential of the projection, shape (..., 2, 2).

        Analytic when the Weingarten map is available:
        ``Db = (I - n (x) n) - d * H`` with ``n`` the normal extension.
        Otherwise central finite differences of :attr:`project_raw`.
        """
        x = np.asarray(x, dtype=float)
        if self.weingarten is None:
            out = np.empty(x.shape[:-1] + (2, 2))
            for j in range(2):
                e = np.zeros(2)
                e[j] = step
                out[..., :, j] = (
                    self.project_raw(x + e) - self.project_raw(x - e)
                ) / (2 * step)
            return out
        n = self.normal(x)
        d = self.signed_distance(x)
        eye = np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2))
        proj = eye - n[..., :, None] * n[..., None, :]
        return proj - d[..., None, None] * self.weingarten(x)


def unit_disk(tubular_width: float = 0.5) -> SmoothBoundary:
    """The unit circle as a :class:`SmoothBoundary`.

    Closed forms: ``d(x) = |x| - 1``, ``b(x) = x/|x|``, ``n(x) = x/|x|``
    and Weingarten map ``(I - n (x) n)/|x|``.  Any ``tubular_width`` below
    1 is geometrically valid; 0.5 is the shipped default.

    Examples
    --------
    >>> disk = unit_disk()
    >>> disk.project([2.0, 0.0])
    array([1., 0.])
    >>> float(disk.signed_distance([0.5, 0.0]))
    -0.5
    """
    if not 0.0 < tubular_width < 1.0:
        raise GeometryError(
            f"tubular width {tubular_width:.6g} invalid for the unit disk; "
            "need a value in (0, 1)"
        )

    def signed_distance(x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x, axis=-1) - 1.0

    def project_raw(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return x / r[..., None]

    def normal(x):
        return project_raw(x)

    def weingarten(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        n = x / r[..., None]
        eye = np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2))
        return (eye - n[..., :, None] * n[..., None, :]) / r[..., None, None]

    def projection_valid(x):
        # unique everywhere except the center (the disk's medial axis)
        return np.linalg.norm(np.asarray(x, dtype=float), axis=-1) > 1e-9

    return SmoothBoundary(
        signed_distance=signed_distance,
        project_raw=project_raw,
        normal=normal,
        weingarten=weingarten,
        tubular_width=tubular_width,
        projection_valid=projection_valid,
    )
