"""
GeoGlimpse configuration
Default parameters for the synthetic world, dataset pipeline, models, training and evaluation.
"""
import logging
import os
import sys
from typing import Any, Dict

import structlog
from dotenv import load_dotenv

# Load environment variables from the .env file
load_dotenv()

# ========================================
# WORLD PRESETS
# ========================================

# Two environments echoing a walking-pace campus robot and an urban car at desk-feasible sizes.
WORLD_PRESETS: Dict[str, Dict[str, Any]] = {
    'campus': {
        'seed': 7,
        'extent_m': [200.0, 120.0],      # (width east, height north)
        'origin_deg': [32.8801, -117.2340],  # south-west corner (lat, lon)
        'cell_size_m': 0.5,
        'building_density': 0.3,
        'palette_size': 12,
        'path_waypoint_count': 14,
        'path_width_m': 3.0,
        'building_size_m': [4.0, 16.0],
        'distractor_count': 12,
        'distractor_speed_mps': 1.2,     # pedestrians
        'distractor_size_m': 0.8,
        'distractor_height_m': 1.7,
        'agent_speed_mps': 0.66,
    },
    'urban': {
        'seed': 11,
        'extent_m': [900.0, 900.0],
        'origin_deg': [32.7150, -117.1625],
        'cell_size_m': 1.0,
        'building_density': 0.35,
        'palette_size': 16,
        'path_waypoint_count': 36,
        'path_width_m': 8.0,
        'building_size_m': [10.0, 40.0],
        'distractor_count': 60,
        'distractor_speed_mps': 4.0,     # traffic
        'distractor_size_m': 2.0,
        'distractor_height_m': 1.6,
        'agent_speed_mps': 3.61,
    },
}

# First-person camera and overhead tile rendering
RENDER_CONFIG: Dict[str, Any] = {
    'fov_deg': 90.0,
    'camera_height_m': 1.0,
    'wall_height_m': 4.0,
    'shade_distance_m': 20.0,           # distance at which wall brightness halves
    'sky_color': [170, 200, 230],
    'floor_color': [70, 70, 64],
    'boundary_color': [40, 40, 48],     # world edge seen from inside
    'out_of_world_color': [128, 128, 128],  # GMP padding
}

# ========================================
# SENSOR CONFIGURATION
# ========================================

SENSOR_CONFIG: Dict[str, Any] = {
    'rtk_sigma_m': 0.02,
    'rtk_accuracy_median_m': 0.014,     # reported horizontal accuracy of a good fix
    'rtk_accuracy_log_sigma': 0.4,
    'rtk_bad_fix_prob': 0.01,
    'rtk_bad_fix_scale_m': 5.0,         # excess over 5 m of a bad fix's reported accuracy
    'phone_sigma_m': 3.0,
    'phone_outlier_prob': 0.02,
    'phone_outlier_sigma_m': 15.0,
}

# ========================================
# DATASET CONFIGURATION
# ========================================

DATASET_CONFIG: Dict[str, Any] = {
    'frame_interval_s': 10.0,
    'interval_tolerance_s': 1.0,
    'seq_len': 24,
    'stride': None,                     # None -> seq_len // 2
    'max_accuracy_m': 5.0,
    'fpp_size': [64, 64],               # (W, H)
    'gmp_size': [64, 64],
    'gmp_coverage_m': 40.0,             # ground extent of one GMP tile side
    'sessions': 24,
    'session_duration_s': 3600.0,
    'split_grid': 8,
}

# ========================================
# MODEL PRESETS
# ========================================

MODEL_PRESETS: Dict[str, Dict[str, Any]] = {
    'full': {
        'variant': 'transformer',
        'enc_channels': [16, 32, 32, 32],
        'enc_kernel': 3,
        'dec_channels': [512, 256, 128, 64, 32],
        'dec_kernel': 3,
        'dec_seed_size': 4,
        'latent_dim': 1000,
        'd_model': 256,
        'n_heads': 16,
        'n_layers': 8,
        'ff_mult': 4,
        'rnn_hidden': 256,
        'rnn_layers': 1,
        'coord_hidden': [256, 64],
        'seq_len': 24,
        'fpp_size': [64, 64],
        'gmp_size': [64, 64],
        'logvar_init': -6.0,
        'dropout': 0.0,
        'reconstruction_enabled': True,
    },
    'desk': {
        'variant': 'transformer',
        'enc_channels': [16, 32, 32, 32],
        'enc_kernel': 3,
        'dec_channels': [512, 256, 128, 64, 32],
        'dec_kernel': 3,
        'dec_seed_size': 4,
        'latent_dim': 256,
        'd_model': 128,
        'n_heads': 8,
        'n_layers': 4,
        'ff_mult': 4,
        'rnn_hidden': 256,
        'rnn_layers': 1,
        'coord_hidden': [256, 64],
        'seq_len': 24,
        'fpp_size': [64, 64],
        'gmp_size': [64, 64],
        'logvar_init': -6.0,
        'dropout': 0.0,
        'reconstruction_enabled': True,
    },
    'micro': {
        'variant': 'transformer',
        'enc_channels': [4, 8, 8, 8],
        'enc_kernel': 3,
        'dec_channels': [16, 8, 8, 4, 4],
        'dec_kernel': 3,
        'dec_seed_size': 1,
        'latent_dim': 4,
        'd_model': 16,
        'n_heads': 2,
        'n_layers': 2,
        'ff_mult': 2,
        'rnn_hidden': 16,
        'rnn_layers': 1,
        'coord_hidden': [16, 8],
        'seq_len': 3,
        'fpp_size': [8, 8],
        'gmp_size': [8, 8],
        'logvar_init': -6.0,
        'dropout': 0.0,
        'reconstruction_enabled': True,
    },
}

# ========================================
# TRAINING CONFIGURATION
# ========================================

TRAIN_CONFIG: Dict[str, Any] = {
    'learning_rate': 1e-4,
    'batch_size': 16,
    'max_epochs': 50,
    'anneal_steps': None,               # None -> steps in the first 10% of max_epochs
    'patience': 5,
    'min_delta': 0.0,
    'val_fraction': 0.10,
    'seed': 0,
    'adam_beta1': 0.9,
    'adam_beta2': 0.999,
    'adam_eps': 1e-8,
    'grad_clip': None,                  # e.g. 1.0 for long RNN rollouts
    'max_steps': None,
    'num_workers': 0,
}

# ========================================
# INFERENCE / EVALUATION CONFIGURATION
# ========================================

INFERENCE_CONFIG: Dict[str, Any] = {
    'min_frames': 2,
    'admit_tolerance_s': 0.1,
    'pairing_window_s': 0.5,
}

EVAL_CONFIG: Dict[str, Any] = {
    'n_points': 200,
    'threshold_fraction': 0.1,          # of the environment diagonal
    'max_threshold_m': None,            # overrides threshold_fraction when set
    'include_warm_up': False,
    'test_duration_s': 3000.0,          # one 50-minute held-out drive
    'test_seed_offset': 10007,
    'spike_threshold_m': 20.0,
    'throughput_frames': 50,
}

SEARCH_CONFIG: Dict[str, Any] = {
    'subset_fraction': 0.1,
    'seeds': [0, 1, 2, 3, 4],
    'space': {
        'learning_rate': [1e-4, 3e-4],
        'latent_dim': [128, 256],
    },
}

# ========================================
# LOGGING CONFIGURATION
# ========================================

def build_json_formatter() -> logging.Formatter:
    """JSON-lines formatter for the error log."""
    return structlog.stdlib.ProcessorFormatter(
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            structlog.processors.TimeStamper(fmt='iso'),
            structlog.processors.JSONRenderer(sort_keys=True),
        ],
        foreign_pre_chain=[
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            structlog.processors.format_exc_info,
        ],
    )


LOGGING_CONFIG: Dict[str, Any] = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'detailed': {
            'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            'datefmt': '%Y-%m-%d %H:%M:%S'
        },
        'simple': {
            'format': '%(levelname)s - %(message)s'
        },
        'json': {
            '()': 'src.config.build_json_formatter',
        }
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'level': 'INFO',
            'formatter': 'simple',
            'stream': sys.stderr
        },
        'file': {
            'class': 'logging.FileHandler',
            'level': 'DEBUG',
            'formatter': 'detailed',
            'filename': 'geoglimpse.log',
            'mode': 'a',
            'encoding': 'utf-8',
            'delay': True
        },
        'error_file': {
            'class': 'logging.FileHandler',
            'level': 'ERROR',
            'formatter': 'json',
            'filename': 'geoglimpse_errors.log',
            'mode': 'a',
            'encoding': 'utf-8',
            'delay': True
        }
    },
    'loggers': {
        '': {  # Root logger
            'handlers': ['console'],
            'level': 'WARNING',
        },
        'src': {
            'handlers': ['console', 'file', 'error_file'],
            'level': 'DEBUG',
            'propagate': False
        },
    }
}

# ========================================
# ENVIRONMENT VARIABLES
# ========================================

def get_env_config() -> Dict[str, Any]:
    """Get configuration from environment variables."""
    threads = os.environ.get('GEOGLIMPSE_NUM_THREADS')
    return {
        'LOG_LEVEL': os.environ.get('GEOGLIMPSE_LOG_LEVEL', 'INFO').upper(),
        'LOG_FILE': os.environ.get('GEOGLIMPSE_LOG_FILE', 'geoglimpse.log'),
        'OUT_DIR': os.environ.get('GEOGLIMPSE_OUT_DIR', 'runs'),
        'NUM_THREADS': int(threads) if threads else None,
    }
