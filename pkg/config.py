# -*- coding: utf-8 -*-
"""
Handles loading and saving experiment configuration from/to an INI file.
Covers corpus generation, the experiment (knowledge source, representation,
baseline, paths), model and training hyper-parameters, and a configurable
logging level. Command-line `--set section.key=value` overrides are applied
on top of the file before conversion.
"""

import configparser
import dataclasses
import logging # Import logging module to use its constants
import math
import os
from typing import Any, Callable, Dict, Iterable, Optional

from datagen import GenConfig
from experiment import ExperimentConfig
from memory_store import parse_threshold
from model import HyperParams, ModelKind

logger = logging.getLogger(__name__) # Use module-specific logger

# Define the expected structure of the config.ini file for validation.
EXPECTED_CONFIG = {
    'Generation': ['n_movies', 'n_actors', 'n_directors', 'n_writers', 'n_tags', 'n_genres',
                   'n_languages', 'templates_per_relation', 'conjunction_rate', 'coreference_rate',
                   'seed', 'train_fraction', 'dev_fraction', 'test_fraction',
                   'patterns_per_question', 'two_hop_questions'],
    'Experiment': ['source', 'representation', 'baseline', 'corpus_dir', 'output_dir',
                   'hashing', 'number_feature', 'exact_match'],
    'Model': ['d', 'hops', 'window', 'hash_threshold', 'max_slots', 'tied', 'init_scale'],
    'Training': ['lr', 'epochs', 'dropout_question', 'dropout_memory', 'dropout_answer',
                 'clip_norm', 'seed', 'progress'],
    'Logging': ['level'],
}

# Define default values for settings if they are missing in config.ini.
DEFAULT_CONFIG = {
    'Generation': {
        'n_movies': '500', 'n_actors': '600', 'n_directors': '150', 'n_writers': '250',
        'n_tags': '120', 'n_genres': '12', 'n_languages': '10',
        'templates_per_relation': '100', 'conjunction_rate': '0.5', 'coreference_rate': '0.8',
        'seed': '1', 'train_fraction': '0.8', 'dev_fraction': '0.1', 'test_fraction': '0.1',
        'patterns_per_question': '0', 'two_hop_questions': 'false',
    },
    'Experiment': {
        'source': 'kb', 'representation': 'kb_triple', 'baseline': 'kv_memnn',
        'corpus_dir': 'corpus', 'output_dir': 'runs/default',
        'hashing': 'true', 'number_feature': 'false', 'exact_match': 'false',
    },
    'Model': {
        'd': '32', 'hops': '2', 'window': '7', 'hash_threshold': '1000', 'max_slots': '1000',
        'tied': 'true', 'init_scale': '0.1',
    },
    'Training': {
        'lr': '0.05', 'epochs': '30', 'dropout_question': '0.0', 'dropout_memory': '0.0',
        'dropout_answer': '0.0', 'clip_norm': '40', 'seed': '1', 'progress': 'false',
    },
    'Logging': {'level': 'INFO'} # Default logging level
}

# Mapping from log level strings (read from config) to logging module constants.
LOG_LEVEL_MAP = {
    'DEBUG': logging.DEBUG,
    'INFO': logging.INFO,
    'WARNING': logging.WARNING,
    'ERROR': logging.ERROR,
    'CRITICAL': logging.CRITICAL
}
# Reverse mapping for saving the logging level string back to config.ini.
LOG_LEVEL_TO_STRING_MAP = {v: k for k, v in LOG_LEVEL_MAP.items()}

_BOOL_STRINGS = {'true': True, 'yes': True, 'on': True, '1': True,
                 'false': False, 'no': False, 'off': False, '0': False}


def parse_bool(value: str) -> bool:
    text = str(value).strip().lower()
    if text not in _BOOL_STRINGS:
        raise ValueError(f"expected true/false, got '{value}'")
    return _BOOL_STRINGS[text]


def _optional_norm(value: str) -> Optional[float]:
    """clip_norm: 'none' / '0' disables clipping."""
    text = str(value).strip().lower()
    if text in ('none', '0', ''):
        return None
    return float(text)


# Converter for every typed option; anything not listed stays a string.
CONVERTERS: Dict[str, Dict[str, Callable[[str], Any]]] = {
    'Generation': {
        **{k: int for k in ('n_movies', 'n_actors', 'n_directors', 'n_writers', 'n_tags', 'n_genres',
                            'n_languages', 'templates_per_relation', 'seed', 'patterns_per_question')},
        **{k: float for k in ('conjunction_rate', 'coreference_rate', 'train_fraction',
                              'dev_fraction', 'test_fraction')},
        'two_hop_questions': parse_bool,
    },
    'Experiment': {
        'baseline': ModelKind,
        'hashing': parse_bool, 'number_feature': parse_bool, 'exact_match': parse_bool,
    },
    'Model': {
        'd': int, 'hops': int, 'window': int, 'hash_threshold': parse_threshold, 'max_slots': int,
        'tied': parse_bool, 'init_scale': float,
    },
    'Training': {
        'lr': float, 'epochs': int, 'dropout_question': float, 'dropout_memory': float,
        'dropout_answer': float, 'clip_norm': _optional_norm, 'seed': int, 'progress': parse_bool,
    },
}


def _write_defaults(config_path: str):
    default_config_obj = configparser.ConfigParser(interpolation=None)
    # Populate with sections and keys from DEFAULT_CONFIG
    for section, section_keys_values in DEFAULT_CONFIG.items():
        default_config_obj[section] = section_keys_values
    with open(config_path, 'w', encoding='utf-8') as default_configfile:
        default_config_obj.write(default_configfile)


def apply_overrides(config: configparser.ConfigParser, overrides: Iterable[str]):
    """
    Applies `section.key=value` overrides in place.

    Raises:
        ValueError: Malformed override or unknown section/key.
    """
    for override in overrides or ():
        if '=' not in override or '.' not in override.split('=', 1)[0]:
            raise ValueError(f"Override '{override}' must look like section.key=value")
        target, value = override.split('=', 1)
        section, key = target.split('.', 1)
        section = next((s for s in EXPECTED_CONFIG if s.lower() == section.strip().lower()), None)
        key = key.strip()
        if section is None or key not in EXPECTED_CONFIG[section]:
            raise ValueError(f"Override '{override}' names an unknown setting")
        if not config.has_section(section):
            config.add_section(section)
        config.set(section, key, value.strip())
        logger.debug(f"Override applied: [{section}] {key} = {value.strip()}")


def load_config(config_path: str, overrides: Optional[Iterable[str]] = None) -> Dict[str, Any]:
    """
    Loads configuration from the specified INI file.
    Uses defaults for missing values, applies overrides, converts every typed
    option, and builds the generation / experiment / hyper-parameter objects.

    Args:
        config_path: Path to the config.ini file.
        overrides: `section.key=value` strings applied on top of the file.

    Returns:
        A dictionary with 'generation' (GenConfig), 'experiment' (ExperimentConfig),
        'hyper' (HyperParams), 'progress' (bool), 'log_level_value' (logging constant),
        'log_level_str' and 'raw' (section -> key -> string, as resolved).

    Raises:
        FileNotFoundError: If the config file doesn't exist and cannot be created with defaults.
        ValueError: For parse errors, bad overrides or type conversion errors (naming section, key, value).
    """
    logger.info(f"Attempting to load configuration from: {config_path}")
    config = configparser.ConfigParser(interpolation=None) # Disable % interpolation

    # Check if the configuration file exists
    if not os.path.exists(config_path):
        logger.warning(f"Configuration file '{config_path}' not found. Attempting to create with defaults.")
        try:
            _write_defaults(config_path)
            logger.info(f"Created default configuration file at '{config_path}'. Please review it.")
        except OSError as e_create:
            logger.error(f"Could not create default configuration file at '{config_path}': {e_create}")
            raise FileNotFoundError(f"Configuration file '{config_path}' not found and could not be created.")

    try:
        config.read(config_path, encoding='utf-8')
    except configparser.Error as e:
        logger.error(f"Error parsing configuration file '{config_path}': {e}")
        raise ValueError(f"Error parsing configuration file: {e}")

    apply_overrides(config, overrides)

    # Resolve every expected option, falling back to defaults.
    raw: Dict[str, Dict[str, str]] = {}
    for section, keys in EXPECTED_CONFIG.items():
        if not config.has_section(section):
            logger.warning(f"Config section '[{section}]' not found, using defaults for this section.")
        raw[section] = {}
        for key in keys:
            if config.has_option(section, key):
                raw[section][key] = config.get(section, key)
            else:
                raw[section][key] = DEFAULT_CONFIG[section][key]
                logger.debug(f"Setting '{key}' in '[{section}]' not found, using default: {raw[section][key]}")
        if config.has_section(section):
            for extra in set(config.options(section)) - set(keys):
                logger.warning(f"Ignoring unknown option '{extra}' in section '[{section}]'")

    # Perform type conversion
    typed: Dict[str, Dict[str, Any]] = {}
    for section, values in raw.items():
        typed[section] = {}
        for key, value_str in values.items():
            converter = CONVERTERS.get(section, {}).get(key)
            if converter is None:
                typed[section][key] = value_str
                continue
            try:
                typed[section][key] = converter(value_str)
            except ValueError as e:
                msg = f"Invalid value for '{key}' in section '[{section}]': '{value_str}' ({e})"
                logger.error(msg)
                raise ValueError(msg)

    settings: Dict[str, Any] = {'raw': raw}
    settings['generation'] = GenConfig(**typed['Generation']).validate()
    settings['experiment'] = ExperimentConfig(**typed['Experiment']).validate()
    training = dict(typed['Training'])
    settings['progress'] = training.pop('progress')
    settings['hyper'] = HyperParams(**typed['Model'], **training).validate()

    # Convert log level string to logging constant
    log_level_str_upper = raw['Logging']['level'].upper()
    settings['log_level_value'] = LOG_LEVEL_MAP.get(log_level_str_upper, logging.INFO)
    settings['log_level_str'] = LOG_LEVEL_TO_STRING_MAP.get(settings['log_level_value'], 'INFO')
    if log_level_str_upper not in LOG_LEVEL_MAP:
        logger.warning(f"Invalid logging level '{raw['Logging']['level']}' in config. Defaulting to INFO.")

    logger.info("Configuration loaded successfully.")
    return settings


def save_config(config_path: str, settings: Dict[str, Any]):
    """
    Saves the resolved settings to an INI file (used to freeze an experiment's
    configuration into its output directory).

    Args:
        config_path: Destination path.
        settings: Dictionary returned by load_config; its 'raw' strings are written,
                  with the logging level taken from 'log_level_str'.
    """
    logger.info(f"Attempting to save configuration to: {config_path}")
    config = configparser.ConfigParser(interpolation=None)
    for section, values in settings.get('raw', DEFAULT_CONFIG).items():
        config[section] = dict(values)
    config['Logging']['level'] = settings.get('log_level_str', 'INFO').upper()

    # Ensure parent directory exists before writing
    config_dir = os.path.dirname(config_path)
    if config_dir and not os.path.exists(config_dir):
        try:
            os.makedirs(config_dir)
            logger.info(f"Created directory for config file: {config_dir}")
        except OSError as e:
            logger.error(f"Could not create directory for config file '{config_path}': {e}")
            raise

    try:
        with open(config_path, 'w', encoding='utf-8') as configfile:
            config.write(configfile)
        logger.info("Configuration saved successfully.")
    except OSError as e:
        logger.error(f"Error writing configuration file '{config_path}': {e}", exc_info=True)
        raise


def _format_setting(section: str, key: str, value: Any) -> str:
    """Inverse of CONVERTERS for one typed value."""
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, ModelKind):
        return value.value
    if value is None:
        return 'none'
    if isinstance(value, float) and math.isinf(value):
        return 'inf'
    # int-typed keys may come back as floats from JSON
    if CONVERTERS.get(section, {}).get(key) in (int, parse_threshold):
        return str(int(value))
    return str(value)


def resolve_settings(settings: Dict[str, Any], experiment: Optional[ExperimentConfig] = None,
                     hyper: Optional[HyperParams] = None) -> Dict[str, Any]:
    """
    Returns a copy of `settings` whose objects and 'raw' strings reflect what a
    command actually ran with (command-line flags, a resumed checkpoint's config).
    """
    resolved = dict(settings)
    raw = {section: dict(values) for section, values in settings.get('raw', DEFAULT_CONFIG).items()}
    if experiment is not None:
        resolved['experiment'] = experiment
        for key, value in dataclasses.asdict(experiment).items():
            raw['Experiment'][key] = _format_setting('Experiment', key, value)
    if hyper is not None:
        resolved['hyper'] = hyper
        for key, value in hyper.to_dict().items():
            section = 'Model' if key in EXPECTED_CONFIG['Model'] else 'Training'
            raw[section][key] = _format_setting(section, key, value)
    resolved['raw'] = raw
    return resolved
