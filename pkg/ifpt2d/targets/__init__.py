# Targets package: first-passage-time laws consumed by the inverse solver
