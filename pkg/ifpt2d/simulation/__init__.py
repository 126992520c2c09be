# Simulation package: exact stepping of the two-compartment process and first-passage sampling
