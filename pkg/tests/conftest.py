import json

import pytest

from oracles import DOE_GRID_CSV, TOY_BASIC_CSV, TOY_BASIC_SPEC, WITNESS_TOY, running_spec
from stabex.explore import build_instance
from stabex.model import ExpressionModel
from stabex.solver import SolverConfig
from stabex.speclang import parse_spec, spec_from_dict


def system_instance(d: dict, cfg=None, **kw):
    spec = spec_from_dict(d)
    model = ExpressionModel(tuple(spec.inputs), tuple(spec.knobs), tuple(spec.outputs), dict(spec.system))
    return build_instance(spec, model, cfg, **kw)


def running_instance(r, xr=(-1, 1), pr=(-2, 2), cfg=None, **extra):
    return system_instance(running_spec(r, xr, pr, **extra), cfg)


@pytest.fixture
def toy_spec():
    return parse_spec(TOY_BASIC_SPEC)


@pytest.fixture
def toy_dir(tmp_path):
    (tmp_path / "smlp_toy_basic.csv").write_text(TOY_BASIC_CSV)
    (tmp_path / "smlp_toy_basic.spec").write_text(TOY_BASIC_SPEC)
    (tmp_path / "witness_toy.spec").write_text(json.dumps(WITNESS_TOY))
    (tmp_path / "doe_four_levels_real.csv").write_text(DOE_GRID_CSV)
    return tmp_path


@pytest.fixture
def witness_toy():
    return system_instance(WITNESS_TOY)


@pytest.fixture
def fast_cfg():
    return SolverConfig(delta="1/10000", epsilon="1/100")
