# Transform package: moving the boundary's time dependence into the input
