"""
Named run recipes.

Each recipe is a flat dotted mapping in the config-file format, so a recipe and
a config file can be layered (``--recipe`` first, then ``--config``, then flags).
"""
import logging
from typing import Dict, List

from pydantic import BaseModel

from ifpt2d.exceptions import ConfigError

logger = logging.getLogger("IFPT2D.Recipes")


class Recipe(BaseModel):
    """A named parameter set."""
    name: str
    description: str
    values: Dict[str, str]


# Fast-leaking neuron used with mean-4 targets on [0, 20].
_FAST = {
    "process.alpha": "0.33",
    "process.beta": "0.2",
    "process.mu": "0",
    "process.sigma": "1",
    "solver.horizon": "20",
    "solver.n_steps": "200",
}

# Slow-leaking neuron used with mean-10 targets on [0, 30].
_SLOW = {
    "process.alpha": "0.02",
    "process.beta": "0.02",
    "process.mu": "0",
    "process.sigma": "0.4",
    "solver.horizon": "30",
    "solver.n_steps": "300",
}

_CVS_MEAN4 = ["0.5", "0.75", "1", "1.5", "2"]
_CVS_MEAN10 = ["0.5", "1", "1.5"]
_HEAVY_LAMBDAS = ["16", "7.11", "4"]
_MU_SWEEP = ["0.3", "0.6"]
_BETA_SWEEP = ["0.5", "0.1", "0.01"]


def _build() -> Dict[str, Recipe]:
    recipes: List[Recipe] = []

    def add(name: str, description: str, base: Dict[str, str], **target: str) -> None:
        values = dict(base)
        values.update({f"target.{key}": value for key, value in target.items()})
        recipes.append(Recipe(name=name, description=description, values=values))

    for family, label in (("inverse_gaussian", "ig"), ("gamma", "gamma")):
        for cv in _CVS_MEAN4:
            add(f"{label}-mean4-cv{cv}", f"{family} mean 4, CV {cv}; alpha=0.33 beta=0.2 sigma=1",
                _FAST, family=family, mean="4", cv=cv)
        for cv in _CVS_MEAN10:
            add(f"{label}-mean10-cv{cv}", f"{family} mean 10, CV {cv}; alpha=beta=0.02 sigma=0.4",
                _SLOW, family=family, mean="10", cv=cv)
        for cv in ("0.5", "1"):
            for mu in _MU_SWEEP:
                add(f"{label}-mean10-cv{cv}-mu{mu}", f"{family} mean 10, CV {cv} with mean input mu={mu}",
                    {**_SLOW, "process.mu": mu}, family=family, mean="10", cv=cv)
        for beta in _BETA_SWEEP:
            add(f"{label}-mean10-cv1-beta{beta}", f"{family} mean 10, CV 1 with coupling beta={beta}",
                {**_SLOW, "process.beta": beta}, family=family, mean="10", cv="1")

    for lam in _HEAVY_LAMBDAS:
        add(f"heavy-ig-lambda{lam}", f"heavy-tailed IG lambda={lam}; alpha=0.33 beta=0.2 sigma=1",
            _FAST, family="heavy_tail_ig", **{"lambda": lam})

    add("exponential-mean4", "exponential with mean 4 (same law as gamma-mean4-cv1)",
        _FAST, family="exponential", mean="4")
    return {recipe.name: recipe for recipe in recipes}


RECIPES: Dict[str, Recipe] = _build()


def get_recipe(name: str) -> Dict[str, str]:
    """
    Flat dotted values of a recipe.

    Raises:
        ConfigError: for an unknown name.
    """
    try:
        recipe = RECIPES[name]
    except KeyError:
        raise ConfigError(f"unknown recipe '{name}'; run 'ifpt2d recipes' for the list") from None
    logger.debug(f"Using recipe '{name}': {recipe.description}")
    return dict(recipe.values)


def list_recipes() -> List[Recipe]:
    return sorted(RECIPES.values(), key=lambda r: r.name)
