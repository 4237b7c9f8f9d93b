import doctest
import importlib

import pytest

MODULES = ["pcarank.baselines", "pcarank.noise", "pcarank.stopping", "pcarank.spectra",
           "pcarank.exact", "pcarank.icsv", "pcarank.io", "pcarank.simlab"]


@pytest.mark.parametrize("name", MODULES)
def test_docstring_examples(name):
    result = doctest.testmod(importlib.import_module(name), optionflags=doctest.ELLIPSIS)
    assert result.failed == 0
