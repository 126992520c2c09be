# Solver package: sequential inverse first-passage boundary estimation
