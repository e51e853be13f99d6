"""
On-disk layout of trained models, metrics reports and loss curves.

A run directory holds ``config.json`` (the resolved RunConfig) and
``metrics.json``, plus ``model/``, ``data/`` and ``loss_curve.csv`` once
the run has trained. A model directory holds ``config.json`` (the
resolved ModelConfig) and one portable tensor per parameter under
``params/``.
"""

import csv
import logging
from pathlib import Path

import numpy as np
from rest_framework.parsers import JSONParser
from rest_framework.renderers import JSONRenderer

from tensor_core.exceptions import ShapeMismatchError, TensorFormatError
from tensor_core.tensor_io import load_tensor, save_tensor

from .dataset import export_scenes
from .metrics import MetricsReport
from .model import ToyBfpNet
from .serializers import MetricsReportSerializer, build_model_config
from .training import smoothed_losses

logger = logging.getLogger(__name__)

CONFIG_NAME = 'config.json'
PARAMS_DIR = 'params'
REPORT_NAME = 'metrics.json'
LOSS_CURVE_NAME = 'loss_curve.csv'
MODEL_DIR = 'model'
DATA_DIR = 'data'


def write_json(path, payload):
    Path(path).write_bytes(JSONRenderer().render(payload))
    return path


def read_json(path):
    try:
        with open(path, 'rb') as stream:
            return JSONParser().parse(stream)
    except FileNotFoundError:
        raise
    except Exception as exc:  # ParseError or a decoding failure
        raise TensorFormatError(f"{path}: unreadable JSON ({exc})") from exc


def save_model(model: ToyBfpNet, directory):
    directory = Path(directory)
    (directory / PARAMS_DIR).mkdir(parents=True, exist_ok=True)
    write_json(directory / CONFIG_NAME, model.config.as_dict())
    for name, value in model.params.items():
        save_tensor(directory / PARAMS_DIR / f"{name}.bfpt", value)
    logger.info(f"Saved {len(model.params)} parameter tensors to {directory}")
    return directory


def load_model(directory, threads=None) -> ToyBfpNet:
    """Rebuild a model from its config, then overwrite every parameter from disk."""
    directory = Path(directory)
    config = build_model_config(read_json(directory / CONFIG_NAME))
    model = ToyBfpNet(config, threads=threads)
    for name, value in model.params.items():
        stored = load_tensor(directory / PARAMS_DIR / f"{name}.bfpt")
        if stored.shape != value.shape:
            raise ShapeMismatchError(f"stored parameter '{name}'", value.shape, stored.shape)
        model.params[name] = stored.astype(model.dtype, copy=False)
    logger.info(f"Loaded {config.variant} model from {directory}")
    return model


def report_payload(report: MetricsReport):
    return MetricsReportSerializer(report).data


def save_report(report: MetricsReport, path):
    write_json(path, report_payload(report))
    logger.info(f"Wrote metrics report to {path}")
    return path


def load_report(path) -> MetricsReport:
    return MetricsReport(**read_json(path))


def write_loss_curve(curve, smoothed, path):
    with open(path, 'w', newline='') as stream:
        writer = csv.writer(stream)
        writer.writerow(['step', 'loss', 'smoothed_loss'])
        for step, (loss, average) in enumerate(zip(curve, smoothed)):
            writer.writerow([step, repr(float(loss)), repr(float(average))])
    return path


def read_loss_curve(path):
    with open(path, newline='') as stream:
        rows = list(csv.DictReader(stream))
    return np.array([float(row['loss']) for row in rows])


def save_run(directory, report: MetricsReport, model: ToyBfpNet, scenes, smoothing_window):
    """Metrics always; model, scenes and loss curve only for a run that took steps."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_report(report, directory / REPORT_NAME)
    if report.steps:
        save_model(model, directory / MODEL_DIR)
        export_scenes(scenes, directory / DATA_DIR)
        write_loss_curve(report.loss_curve, smoothed_losses(report.loss_curve, smoothing_window),
                         directory / LOSS_CURVE_NAME)
    return directory
