# Numerical laboratory for rational approximation on the middle-third Cantor set.
