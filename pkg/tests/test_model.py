"""Data model: bundled example values, validation report, JSON round-trip."""

import numpy as np
import pytest

from cubicobs.exprlang import SignalDims, parse, unparse
from cubicobs.model import (
    Certificate,
    ConfigError,
    Lipschitz,
    ObserverParams,
    OneSidedLipschitz,
    PlantModel,
    SystemConfig,
    config_from_dict,
    config_to_dict,
    example_system,
    load_config,
    save_config,
    validate,
)

DIMS = SignalDims(n=2, n_u=1, n_y=1, n_delta=1, n_tau=0)


def small_plant(**overrides):
    base = dict(
        A=[[-2.0, -10.0], [0.0, -1.0]],
        C=[[1.0, 0.0]],
        D=[[-1.0], [1.0]],
        n_u=1,
        delta=(1.0,),
        f_u=(parse("u1@1", DIMS), parse("u1", DIMS)),
        f_g=(parse("x2*x1", DIMS),),
        f_L=(parse("x1*cos(u1)", DIMS), parse("sin(x2)", DIMS)),
    )
    base.update(overrides)
    return PlantModel(**base)


# --- bundled example ------------------------------------------------------

def test_example_system_matrices():
    ex = example_system()
    assert np.array_equal(ex.nominal.A, [[-2.0, -10.0], [0.0, -1.0]])
    assert np.array_equal(ex.nominal.C, [[1.0, 0.0]])
    assert np.array_equal(ex.nominal.D, [[-1.0], [1.0]])
    assert np.array_equal(ex.uncertain.A, [[-0.9, -8.9], [1.1, 0.1]])
    assert ex.nominal.delta == (1.0,)
    assert ex.uncertain.delta == (2.0,)
    # perturbed variant shares the expressions; only matrices and delay differ
    assert ex.uncertain.f_u == ex.nominal.f_u
    assert ex.uncertain.f_L == ex.nominal.f_L


def test_example_observer_and_certificate():
    ex = example_system()
    obs = ex.observer
    assert np.array_equal(obs.E, [[1.0], [-1.0]])
    assert np.array_equal(obs.G, [[-10.0, 0.0], [1.0, -11.0]])
    assert np.array_equal(obs.J, [[0.0], [9.0]])
    assert np.array_equal(obs.theta, np.eye(1))
    assert obs.alpha == 1.0
    # published gain, two significant figures
    assert obs.N[0, 0] == pytest.approx(-0.017, rel=0.05)
    assert obs.N[1, 0] == pytest.approx(0.0017, rel=0.05)
    assert ex.certificate.beta == 100.0
    assert np.array_equal(
        ex.certificate.P, [[59.0535, 1.7898], [1.7898, 17.8858]]
    )
    assert ex.lipschitz.gamma == 1.0


def test_example_validates_clean():
    ex = example_system()
    assert validate(ex.nominal, ex.observer) == []
    assert validate(ex.uncertain, ex.observer) == []


# --- validation -----------------------------------------------------------

def names(violations):
    return {v.name for v in violations}


def test_validate_dimension_mismatches():
    assert "A-square" in names(validate(small_plant(A=[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])))
    assert "C-dims" in names(validate(small_plant(C=[[1.0]])))
    assert "D-dims" in names(validate(small_plant(D=[[1.0]])))
    assert "f_u-len" in names(validate(small_plant(f_u=(parse("u1", DIMS),))))
    assert "f_g-len" in names(validate(small_plant(f_g=())))
    assert "f_L-len" in names(validate(small_plant(f_L=())))


def test_validate_negative_delay():
    assert "delta-nonneg" in names(validate(small_plant(delta=(-1.0,))))
    assert "tau-nonneg" in names(validate(small_plant(tau=(-0.5,))))


def test_validate_state_in_f_u():
    bad = small_plant(f_u=(parse("x1", DIMS), parse("u1", DIMS)))
    assert "f_u-state-ref" in names(validate(bad))


def test_validate_ref_out_of_model_range():
    # parsed against roomier dims, then checked against the actual plant
    wide = SignalDims(n=5, n_u=3, n_y=2, n_delta=2, n_tau=1)
    bad = small_plant(f_L=(parse("x5", wide), parse("sin(x2)", wide)))
    assert "f_L-ref-range" in names(validate(bad))


def test_validate_observer_blocks():
    ex = example_system()
    obs = ex.observer
    bad = ObserverParams(G=np.eye(3), J=obs.J, E=obs.E, N=obs.N, theta=obs.theta)
    assert "G-dims" in names(validate(ex.nominal, bad))
    bad = ObserverParams(G=obs.G, J=obs.J, E=obs.E, N=obs.N, theta=[[0.0, 1.0], [0.0, 0.0]])
    assert "theta-dims" in names(validate(ex.nominal, bad))
    bad = ObserverParams(G=obs.G, J=obs.J, E=obs.E, N=obs.N, theta=[[-1.0]])
    assert "theta-psd" in names(validate(ex.nominal, bad))
    bad = ObserverParams(G=obs.G, J=obs.J, E=obs.E, N=obs.N, theta=obs.theta, alpha=0.0)
    assert "alpha-positive" in names(validate(ex.nominal, bad))


def test_validate_theta_symmetry():
    n2 = SignalDims(n=2, n_u=0, n_y=2, n_delta=0, n_tau=0)
    plant = PlantModel(
        A=np.eye(2), C=np.eye(2), D=np.zeros((2, 1)), n_u=0,
        f_u=(parse("0", n2), parse("0", n2)),
        f_g=(parse("0", n2),),
        f_L=(parse("0", n2), parse("0", n2)),
    )
    obs = ObserverParams(G=np.eye(2), J=np.eye(2), E=np.zeros((2, 2)),
                         N=np.zeros((2, 2)), theta=[[1.0, 0.5], [0.0, 1.0]])
    assert "theta-symmetry" in names(validate(plant, obs))


# --- certificate constraints ---------------------------------------------

def test_certificate_multiplier_exclusivity():
    P = np.eye(2)
    assert Certificate(P=P, beta=1.0).multipliers() == (1.0,)
    assert Certificate(P=P, mu1=2.0, mu2=3.0).multipliers() == (2.0, 3.0)
    with pytest.raises(ValueError, match="not both"):
        Certificate(P=P, beta=1.0, mu1=2.0, mu2=3.0)
    with pytest.raises(ValueError, match="beta"):
        Certificate(P=P)
    with pytest.raises(ValueError):
        Certificate(P=P, mu1=2.0)


def test_lipschitz_gamma_positive():
    with pytest.raises(ValueError):
        Lipschitz(gamma=0.0)
    with pytest.raises(ValueError):
        Lipschitz(gamma=-1.0)


# --- JSON round-trip ------------------------------------------------------

def test_dict_roundtrip_nominal_and_uncertain():
    ex = example_system()
    for cfg in (ex.nominal_config(), ex.uncertain_config()):
        back = config_from_dict(config_to_dict(cfg))
        assert back == cfg


def test_dict_roundtrip_one_sided_and_mu_certificate():
    ex = example_system()
    cfg = SystemConfig(
        plant=ex.nominal,
        lipschitz=OneSidedLipschitz(rho=0.5, a=0.75, b=1.5),
        observer=ex.observer,
        certificate=Certificate(P=np.eye(2), mu1=1.5, mu2=1.0),
    )
    back = config_from_dict(config_to_dict(cfg))
    assert back == cfg
    assert isinstance(back.lipschitz, OneSidedLipschitz)


def test_file_roundtrip(tmp_path):
    ex = example_system()
    path = tmp_path / "nominal.json"
    save_config(ex.nominal_config(), path)
    assert load_config(path) == ex.nominal_config()


def test_margins_never_persisted(tmp_path):
    ex = example_system()
    cfg = ex.nominal_config()
    cfg.certificate.lmi_margin = -1.0
    cfg.certificate.n_margin = 0.0
    path = tmp_path / "cfg.json"
    save_config(cfg, path)
    loaded = load_config(path)
    assert loaded.certificate.lmi_margin is None
    assert loaded.certificate.n_margin is None
    assert loaded.certificate.equilibrium is None


def test_observer_block_defaults():
    ex = example_system()
    doc = config_to_dict(ex.nominal_config())
    for key in ("N", "theta", "alpha"):
        del doc["observer"][key]
    cfg = config_from_dict(doc)
    assert np.array_equal(cfg.observer.N, np.zeros((2, 1)))
    assert np.array_equal(cfg.observer.theta, np.eye(1))
    assert cfg.observer.alpha == 1.0


# --- schema errors carry field paths -------------------------------------

def base_doc():
    return config_to_dict(example_system().nominal_config())


def test_error_missing_key():
    doc = base_doc()
    del doc["A"]
    with pytest.raises(ConfigError, match="A"):
        config_from_dict(doc)


def test_error_bad_expression_names_entry():
    doc = base_doc()
    doc["f_L"][0] = "x1 +"
    with pytest.raises(ConfigError, match=r"f_L\[0\]"):
        config_from_dict(doc)


def test_error_state_reference_in_f_u():
    doc = base_doc()
    doc["f_u"][0] = "x1"
    with pytest.raises(ConfigError, match=r"f_u\[0\].*state"):
        config_from_dict(doc)


def test_error_negative_delay_names_entry():
    doc = base_doc()
    doc["delta"][0] = -2.0
    with pytest.raises(ConfigError, match=r"delta\[0\]"):
        config_from_dict(doc)


def test_error_matrix_shape():
    doc = base_doc()
    doc["A"] = [[1.0, 2.0]]
    with pytest.raises(ConfigError, match="A"):
        config_from_dict(doc)


def test_error_gamma_nonpositive():
    doc = base_doc()
    doc["lipschitz"] = {"gamma": 0.0}
    with pytest.raises(ConfigError, match="gamma"):
        config_from_dict(doc)


def test_error_unknown_lipschitz_block():
    doc = base_doc()
    doc["lipschitz"] = {"rho": 1.0}
    with pytest.raises(ConfigError, match="lipschitz"):
        config_from_dict(doc)


def test_error_reference_beyond_dims():
    doc = base_doc()
    doc["f_L"][0] = "u1@2"  # only one input delay configured
    with pytest.raises(ConfigError, match=r"f_L\[0\]"):
        config_from_dict(doc)


def test_load_config_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(path)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.json")


def test_unparse_expressions_survive(tmp_path):
    # serialized expressions are the fully parenthesized text form
    doc = base_doc()
    assert doc["f_g"] == [unparse(example_system().nominal.f_g[0])]
