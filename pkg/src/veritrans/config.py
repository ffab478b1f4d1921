"""INI-style configuration file.

Example::

    [llm]
    endpoint_url = https://api.openai.com/v1/chat/completions
    model_name = gpt-4o-mini
    timeout = 60
    max_retries = 3
    api_key_env_var = OPENAI_API_KEY
    backoff_base = 1.0

    [pipeline]
    tau = 75
    workers = 4
    seed = 42
    remove_stop_words = false

    [columns]
    # dataset column name = source column in your CSV
    conditions = requirement_text

The credential itself is never read from this file, only the name of the
environment variable holding it.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Dict, Optional

from .stats import DEFAULT_SEED
from .translator import LlmConfig
from .validators import DEFAULT_TAU, check_tau


@dataclass
class Settings:
    llm: Optional[LlmConfig] = None
    tau: float = DEFAULT_TAU
    workers: int = 1
    seed: int = DEFAULT_SEED
    remove_stop_words: bool = False
    columns: Dict[str, str] = field(default_factory=dict)


def load_settings(path: Optional[str] = None) -> Settings:
    if path is None:
        return Settings()
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    settings = Settings()
    if parser.has_section("llm"):
        sec = parser["llm"]
        if "api_key" in sec:
            raise ValueError("put the credential in an environment variable, not the config file")
        settings.llm = LlmConfig(
            endpoint_url=sec.get("endpoint_url", "https://api.openai.com/v1/chat/completions"),
            model_name=sec.get("model_name", "gpt-4o-mini"),
            timeout=sec.getfloat("timeout", 60.0),
            max_retries=sec.getint("max_retries", 3),
            api_key_env_var=sec.get("api_key_env_var", "OPENAI_API_KEY"),
            backoff_base=sec.getfloat("backoff_base", 1.0),
        )
    if parser.has_section("pipeline"):
        sec = parser["pipeline"]
        settings.tau = check_tau(sec.getfloat("tau", DEFAULT_TAU))
        settings.workers = max(1, sec.getint("workers", 1))
        settings.seed = sec.getint("seed", DEFAULT_SEED)
        settings.remove_stop_words = sec.getboolean("remove_stop_words", False)
    if parser.has_section("columns"):
        settings.columns = dict(parser["columns"])
    return settings
