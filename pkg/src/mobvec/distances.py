"""Distance kernels shared by the gravity fits and network analyses."""

import enum
import math

import numpy as np

from .errors import DomainError

EARTH_RADIUS_KM = 6371.0088

# Dataset presets for the geographic floor: inter-city corpora impute 1 km,
# intra-city corpora 0.01 km.
FLOOR_INTER_CITY_KM = 1.0
FLOOR_INTRA_CITY_KM = 0.01


class DistanceKind(enum.Enum):
    EMBEDDING_COSINE = "embedding"
    EMBEDDING_DOT = "dot"
    GEOGRAPHIC_KM = "geographic"
    PPR_COSINE = "ppr-cosine"
    PPR_JSD = "ppr-jsd"


def cosine_distance(u, v):
    """1 - cos(u, v), in [0, 2]; rejects zero vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DomainError(f"vector length mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DomainError("cosine distance undefined for zero vector")
    distance = 1.0 - float(np.dot(u, v)) / (nu * nv)
    return min(max(distance, 0.0), 2.0)


def dot_similarity(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DomainError(f"vector length mismatch: {u.shape} vs {v.shape}")
    return float(np.dot(u, v))


def _coordinates(point):
    """Accept a (lat, lon) pair or a LocationRecord-like object."""
    if hasattr(point, "latitude"):
        if point.latitude is None or point.longitude is None:
            raise DomainError(f"location {point.id!r} has no coordinates")
        return float(point.latitude), float(point.longitude)
    lat, lon = point
    return float(lat), float(lon)


def great_circle_km(a, b, floor_km=FLOOR_INTER_CITY_KM):
    """Haversine distance in km, floored at floor_km.

    The floor stands in for unresolvable short distances (same campus, same
    airport city); it must be positive so log-space fits stay defined.
    """
    if floor_km <= 0:
        raise DomainError(f"floor_km must be positive, got {floor_km}")
    lat1, lon1 = _coordinates(a)
    lat2, lon2 = _coordinates(b)
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    distance = 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))
    return max(distance, floor_km)
