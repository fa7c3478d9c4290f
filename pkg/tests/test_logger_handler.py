import pytest

from handlers.logger_handler import Logger


def test_threshold_filters_messages(capsys):
    Logger.set_max_log_level("warning")
    Logger.log("descent step", "INFO")
    Logger.log("fallback step", "WARNING")
    Logger.banner("Drier")
    out = capsys.readouterr().out
    assert "descent step" not in out
    assert "| WARNING |" in out and "fallback step" in out
    assert "Drier" not in out


def test_debug_enables_everything(capsys):
    Logger.set_max_log_level("DEBUG")
    assert Logger.is_enabled("DEBUG")
    Logger.banner("Drier equilibrium")
    assert "Drier equilibrium" in capsys.readouterr().out


def test_unknown_levels_are_rejected():
    with pytest.raises(ValueError):
        Logger.set_max_log_level("VERBOSE")
    with pytest.raises(ValueError):
        Logger.log("message", "NOTICE")
