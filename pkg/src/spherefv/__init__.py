"""Voronoi finite volumes for the Laplace-Beltrami operator on the sphere."""
