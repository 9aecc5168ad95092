import pytest

from photon_correlator import (
    ConfigError,
    Mode,
    PoissonLaserModel,
    PulsedSourceModel,
    parse_config_text,
)

GOOD = """
[run]
seed = 42
n_pulses = 1000

[source]
type = dot
rep_rate_hz = 82e6
lifetime_ps = 370
g2_target = 0.24
mean_n = 0.1

[splitter]
transmission = 0.5

[detector.APD]
efficiency = 0.38
dark_rate_hz = 100
jitter_fwhm_ps = 550

[detector.SSPD]
efficiency = 0.02
dark_rate_hz = 100
jitter_fwhm_ps = 170
dead_time_ps = 10000

[correlator]
bin_width_ps = 32
range_halfwidth_ps = 48780
mode = ALL_STOPS

[hbt]
start = APD
stop = SSPD
"""


def test_parses_full_config():
    cfg = parse_config_text(GOOD)
    assert cfg.seed == 42
    assert cfg.n_pulses == 1000
    assert isinstance(cfg.source, PulsedSourceModel)
    assert cfg.source.photon_dist[2] == pytest.approx(0.0012)
    assert set(cfg.detectors) == {"APD", "SSPD"}
    assert cfg.detectors["SSPD"].dead_time_ps == 10000
    assert cfg.splitter.transmission == 0.5
    assert cfg.correlator.mode is Mode.ALL_STOPS
    assert cfg.correlator.range_max_ps % 32 == 0
    assert cfg.hbt.start == "APD"


def test_laser_source():
    cfg = parse_config_text("""
[run]
seed = 1
n_pulses = 10

[source]
type = laser
rep_rate_hz = 100e3
mu = 10
""")
    assert isinstance(cfg.source, PoissonLaserModel)
    assert cfg.source.mu == 10.0


def test_missing_run_section():
    with pytest.raises(ConfigError, match="run: section missing"):
        parse_config_text("[source]\ntype = laser\nrep_rate_hz = 1\nmu = 1\n")


def test_missing_seed_field_path():
    with pytest.raises(ConfigError, match="run.seed"):
        parse_config_text("[run]\nn_pulses = 5\n[source]\ntype = laser\n"
                          "rep_rate_hz = 1\nmu = 1\n")


def test_bad_number_reports_path():
    bad = GOOD.replace("efficiency = 0.38", "efficiency = lots")
    with pytest.raises(ConfigError, match="detector.APD.efficiency"):
        parse_config_text(bad)


def test_out_of_range_efficiency():
    bad = GOOD.replace("efficiency = 0.38", "efficiency = 1.38")
    with pytest.raises(ConfigError, match="detector.APD"):
        parse_config_text(bad)


def test_missing_source():
    with pytest.raises(ConfigError, match="source: section missing"):
        parse_config_text("[run]\nseed = 1\nn_pulses = 5\n")


def test_unknown_source_type():
    with pytest.raises(ConfigError, match="source.type"):
        parse_config_text("[run]\nseed = 1\nn_pulses = 5\n"
                          "[source]\ntype = led\n")


def test_ambiguous_photon_stats():
    bad = GOOD.replace("g2_target = 0.24", "g2_target = 0.24\np0 = 0.9")
    with pytest.raises(ConfigError, match="not both"):
        parse_config_text(bad)


def test_infeasible_photon_stats():
    bad = GOOD.replace("mean_n = 0.1", "mean_n = 3")
    with pytest.raises(ConfigError, match="infeasible"):
        parse_config_text(bad)


def test_unresolved_detector_reference():
    bad = GOOD.replace("start = APD", "start = TES")
    with pytest.raises(ConfigError, match="hbt.start: unknown detector 'TES'"):
        parse_config_text(bad)


def test_correlator_requires_range():
    bad = GOOD.replace("range_halfwidth_ps = 48780", "")
    with pytest.raises(ConfigError, match="correlator"):
        parse_config_text(bad)


def test_correlator_indivisible_range():
    cfg_text = GOOD.replace(
        "range_halfwidth_ps = 48780",
        "range_min_ps = -100\nrange_max_ps = 110",
    )
    with pytest.raises(ConfigError, match="divisible"):
        parse_config_text(cfg_text)


def test_seed_override():
    cfg = parse_config_text(GOOD)
    assert cfg.with_seed(7).seed == 7
    assert cfg.with_seed(7).n_pulses == cfg.n_pulses


def test_tcspc_analysis_choice():
    text = GOOD + "\n[tcspc]\ndetector = SSPD\nanalysis = irf\n"
    cfg = parse_config_text(text)
    assert cfg.tcspc.analysis == "irf"
    with pytest.raises(ConfigError, match="tcspc.analysis"):
        parse_config_text(GOOD + "\n[tcspc]\ndetector = SSPD\nanalysis = magic\n")


def test_de_sweep_parsing():
    text = GOOD + "\n[de_sweep]\ndetector = SSPD\nmu = 0.01, 0.1,1\n"
    cfg = parse_config_text(text)
    assert cfg.de_sweep.mu_values == (0.01, 0.1, 1.0)
    assert cfg.de_sweep.pulses_per_point == 1_000_000


def test_detector_name_restricted_to_filename_safe():
    bad = GOOD.replace("[detector.APD]", "[detector.A/PD]")
    with pytest.raises(ConfigError, match="detector name"):
        parse_config_text(bad)
