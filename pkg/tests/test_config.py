import pytest

from hsl.config import ConfigError, ExperimentConfig, load_config, parse_config


def test_empty_file_gives_defaults():
    cfg = parse_config("")
    assert cfg == ExperimentConfig()
    assert cfg.problem.D == 8 and cfg.problem.observed == (1, 2, 3)
    assert cfg.sde.steps == 1000 and cfg.sde.t_floor == 1e-3
    assert cfg.train.steps == 5000 and cfg.train.batch == 128


def test_values_are_converted_by_field_type():
    cfg = parse_config(
        """
        [run]
        seed = 7
        [problem]
        observed = 1, 4
        y = 0.5 -0.5
        sigma_B = 0
        [sde]
        n_paths = 1e4
        check_prop3 = no
        [train]
        grid_sizes = 20 30
        """
    )
    assert cfg.seed == 7
    assert cfg.problem.observed == (1, 4) and cfg.problem.y == (0.5, -0.5) and cfg.problem.sigma_B == (0.0,)
    assert cfg.sde.n_paths == 10_000 and cfg.sde.check_prop3 is False
    assert cfg.train.grid_sizes == (20, 30)


def test_unknown_key_reports_its_line():
    with pytest.raises(ConfigError, match=r"cfg\.ini:3: unknown key 'stepz'"):
        parse_config("[sde]\nsteps = 10\nstepz = 5\n", source="cfg.ini")


def test_unknown_section_reports_its_line():
    with pytest.raises(ConfigError, match=r":2: unknown section \[solver\]"):
        parse_config("\n[solver]\nx = 1\n")


def test_bad_value_is_rejected():
    with pytest.raises(ConfigError, match="bad value for 'steps'"):
        parse_config("[sde]\nsteps = many\n")
    with pytest.raises(ConfigError, match="bad value"):
        parse_config("[sde]\ncheck_prop3 = maybe\n")


def test_unknown_run_key():
    with pytest.raises(ConfigError, match=r"\[run\]"):
        parse_config("[run]\nseeds = 1\n")


def test_ini_round_trip():
    cfg = parse_config("[run]\nseed = 3\n[problem]\nT = 4.5\ny = 0.1, 0.2, 0.3\n[train]\nlocations = -1, 0.25\n")
    again = parse_config(cfg.to_ini())
    assert again == cfg and again.digest() == cfg.digest()


def test_digest_tracks_effective_values():
    assert parse_config("").digest() == ExperimentConfig().digest()
    # spelling out a default does not change the effective configuration
    assert parse_config("[sde]\nsteps = 1000\n").digest() == ExperimentConfig().digest()
    assert parse_config("[sde]\nsteps = 999\n").digest() != ExperimentConfig().digest()


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.ini")
    (tmp_path / "ok.ini").write_text("[run]\nseed = 1\n")
    assert load_config(tmp_path / "ok.ini").seed == 1


def test_malformed_file_is_a_config_error():
    with pytest.raises(ConfigError):
        parse_config("steps = 1\n")
