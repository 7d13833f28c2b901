import copy

import pytest

from omit_cool.config import ConfigError, load_config, parse_config, read_recipe, recipe_names


def _evolve_config(kappa=1.0):
    return {
        "task": "evolve",
        "system": {"kappa": kappa, "omega_m": 0.02 * kappa, "omega_mc": 2.0 * kappa,
                   "Q_m": 1e5, "Q_mc": 1e4, "n_th": 1e3, "g": 2e-5 * kappa,
                   "g_c_over_omega_mc": 5e-5},
        "tones": {"cascaded": {"alphas": [1e3, [0.0, 1e3]],
                               "delta_0_prime_over_omega_m": 1.0}},
        "options": {"t_end": 10.0 / kappa, "output_stride": 1.0 / kappa},
        "numerics": {"max_step": 0.01 / kappa},
    }


def test_every_recipe_parses():
    names = recipe_names()
    assert {"fig2", "fig3b", "fig5_three", "oracle_scaled"} <= set(names)
    for name in names:
        cfg = load_config(name)
        assert cfg.resolved["task"] == cfg.task


def test_kappa_normalization():
    a = parse_config(_evolve_config(1.0))
    b = parse_config(_evolve_config(2.5e6))
    for name, value in a.params.to_dict().items():
        assert getattr(b.params, name) == pytest.approx(value, rel=1e-14)
    assert b.options["t_end"] == pytest.approx(10.0, rel=1e-14)
    assert b.controls.max_step == pytest.approx(0.01, rel=1e-14)
    assert b.tones[1].alpha == 1e3j


def test_resolved_config_is_a_fixed_point():
    for name in ("fig2", "fig3b", "fig5_three", "oracle_scaled", "meanfield_two_tone"):
        cfg = load_config(name)
        again = parse_config(copy.deepcopy(cfg.resolved))
        assert again.resolved == cfg.resolved
        assert again.params == cfg.params


def test_n_c_th_default_and_override():
    cfg = parse_config(_evolve_config())
    assert cfg.params.n_c_th == pytest.approx(1e3 * 0.02 / 2.0)
    data = _evolve_config()
    data["system"]["n_c_th"] = 7.0
    assert parse_config(data).params.n_c_th == 7.0


@pytest.mark.parametrize("mutate", [
    lambda d: d["system"].pop("kappa"),
    lambda d: d["system"].update(gamma=1e-7),             # both gamma and Q_m
    lambda d: d["system"].pop("g"),                       # neither g form
    lambda d: d.update(extra=1),
    lambda d: d["options"].update(t_end=-1.0),
    lambda d: d["options"].update(unknown=1),
    lambda d: d.update(task="plot"),
    lambda d: d.update(tones={"cascaded": {"alphas": []}}),
    lambda d: d.update(tones={"explicit": [{"alpha": 1.0, "delta_prime": 0.1}], "drives": []}),
    lambda d: d["numerics"].update(rtol=0),
])
def test_invalid_configs_rejected(mutate):
    data = _evolve_config()
    mutate(data)
    with pytest.raises(ConfigError):
        parse_config(data)


def test_semantic_errors():
    data = _evolve_config()
    data["tones"] = {"explicit": [{"alpha": 1.0, "delta_prime": 0.1},
                                  {"alpha": 1.0, "delta_prime": 0.1}]}
    with pytest.raises(ConfigError):
        parse_config(data)
    data = _evolve_config()
    data["task"] = "meanfield"
    data.pop("options")
    with pytest.raises(ConfigError):
        parse_config(data)


def test_unknown_recipe():
    with pytest.raises(ConfigError):
        read_recipe("fig99")
    with pytest.raises(ConfigError):
        load_config("/nonexistent/fig99.json")
