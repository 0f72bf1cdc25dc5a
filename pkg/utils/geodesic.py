import numpy as np


def great_circle_distance(u, v):
    """
    Great-circle distance (radians) between two directions on the unit sphere.
    Inputs need not be normalized.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)

    # atan2 form stays accurate for nearly equal and nearly antipodal points
    return float(np.arctan2(np.linalg.norm(np.cross(u, v)), np.dot(u, v)))


def is_within_cap(point, center, radius):
    """
    Check whether a direction lies inside the spherical cap of the given
    angular radius around center
    """
    return great_circle_distance(point, center) <= radius
