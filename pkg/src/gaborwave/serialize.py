"""File formats: run reports, parameter checkpoints, config files, CSV dumps.

Run report: plain text, `key = value` header lines, one whitespace-separated
record per epoch under a column-header line, floats printed with 9
significant digits.

Checkpoint: little-endian binary. Layout:
    magic b"GWCK0001"
    u32 entry count
    per entry: u16 name length, name (utf-8), u8 flags (bit 0: has imaginary
    plane), u8 ndim, u64 * ndim shape, float64 * size real plane,
    [float64 * size imaginary plane]

Config: INI-style `key = value` with one section per concern ([task],
[model], [train]); values are validated against the dataclass invariants at
load time.
"""

from __future__ import annotations

import configparser
import struct
from io import StringIO
from pathlib import Path

import numpy as np

from .data import SyntheticTask
from .errors import ParameterError
from .filterbank import FilterFamily
from .model import ConvBlockSpec, FrontEndSpec, LayerGraph
from .training import RunReport, TrainConfig

_MAGIC = b"GWCK0001"


def fmt9(x: float) -> str:
    return f"{x:.9g}"


# -- run report --------------------------------------------------------------

def write_run_report(report: RunReport, path: str | Path):
    buf = StringIO()
    buf.write("# gaborwave run report\n")
    buf.write(f"seed = {report.seed}\n")
    buf.write(f"config_hash = {report.config_hash}\n")
    buf.write("epoch train_loss valid_loss valid_acc lr\n")
    for e, tl, vl, va, lr in zip(report.epochs, report.train_loss,
                                 report.valid_loss, report.valid_acc, report.lr):
        buf.write(f"{e} {fmt9(tl)} {fmt9(vl)} {fmt9(va)} {fmt9(lr)}\n")
    buf.write(f"final_test_acc = {fmt9(report.final_test_acc)}\n")
    Path(path).write_text(buf.getvalue())


def read_run_report(path: str | Path) -> RunReport:
    lines = Path(path).read_text().splitlines()
    header: dict[str, str] = {}
    rows = []
    in_table = False
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("epoch "):
            in_table = True
            continue
        if "=" in line and (not in_table or line.startswith("final_test_acc")):
            key, _, val = line.partition("=")
            header[key.strip()] = val.strip()
            continue
        rows.append(line.split())
    report = RunReport(seed=int(header["seed"]), config_hash=header["config_hash"])
    for e, tl, vl, va, lr in rows:
        report.epochs.append(int(e))
        report.train_loss.append(float(tl))
        report.valid_loss.append(float(vl))
        report.valid_acc.append(float(va))
        report.lr.append(float(lr))
    report.final_test_acc = float(header["final_test_acc"])
    return report


# -- cutoff CSV ---------------------------------------------------------------

def write_cutoffs_csv(cutoffs_hz: list[tuple[float, float]], path: str | Path):
    lines = ["filter,f1_hz,f2_hz"]
    for i, (f1, f2) in enumerate(cutoffs_hz):
        lines.append(f"{i},{fmt9(f1)},{fmt9(f2)}")
    Path(path).write_text("\n".join(lines) + "\n")


# -- checkpoint ---------------------------------------------------------------

def write_checkpoint(named_params, path: str | Path):
    """named_params: iterable of (name, re_array, im_array_or_None)."""
    chunks = [_MAGIC]
    entries = list(named_params)
    chunks.append(struct.pack("<I", len(entries)))
    for name, re, im in entries:
        re = np.asarray(re, dtype="<f8")
        nb = name.encode()
        flags = 1 if im is not None else 0
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<BB", flags, re.ndim))
        chunks.append(struct.pack(f"<{re.ndim}Q", *re.shape))
        chunks.append(re.tobytes())
        if im is not None:
            chunks.append(np.asarray(im, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_checkpoint(path: str | Path) -> dict[str, tuple[np.ndarray, np.ndarray | None]]:
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise ParameterError(f"{path} is not a gaborwave checkpoint")
    off = 8
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    out: dict[str, tuple[np.ndarray, np.ndarray | None]] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off:off + nlen].decode()
        off += nlen
        flags, ndim = struct.unpack_from("<BB", raw, off)
        off += 2
        shape = struct.unpack_from(f"<{ndim}Q", raw, off)
        off += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        re = np.frombuffer(raw, dtype="<f8", count=size, offset=off).reshape(shape).copy()
        off += 8 * size
        im = None
        if flags & 1:
            im = np.frombuffer(raw, dtype="<f8", count=size, offset=off).reshape(shape).copy()
            off += 8 * size
        out[name] = (re, im)
    return out


# -- config file ----------------------------------------------------------------

def load_config(path: str | Path) -> tuple[SyntheticTask, LayerGraph, FilterFamily, TrainConfig, dict]:
    """Parse an experiment config into validated task/graph/train objects.

    Returns (task, graph, family, train_config, counts) where counts holds
    the split sizes {'n_train': ..., 'n_valid': ..., 'n_test': ...}.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(str(path))
    if not read:
        raise ParameterError(f"config file {path} not found or unreadable")
    try:
        task_sec = parser["task"]
        model_sec = parser["model"]
        train_sec = parser["train"]
    except KeyError as exc:
        raise ParameterError(f"config missing section {exc}") from None

    n_classes = task_sec.getint("n_classes", 3)
    bands = []
    for i in range(n_classes):
        spec = task_sec.get(f"band_{i}", None)
        if spec is None:
            raise ParameterError(f"config missing band_{i} under [task]")
        lo, hi = (float(v) for v in spec.split())
        bands.append((lo, hi))
    task = SyntheticTask(
        n_classes=n_classes,
        bands=tuple(bands),
        snr_db=task_sec.getfloat("snr_db", 20.0),
        sample_rate=task_sec.getfloat("sample_rate", 16000.0),
        chunk=task_sec.getint("chunk", 512),
    )

    conv_blocks = []
    spec = model_sec.get("conv_blocks", "").strip()
    if spec:
        for part in spec.split(","):
            filters, kernel, pool = (int(v) for v in part.split())
            conv_blocks.append(ConvBlockSpec(filters, kernel, pool))
    dense_widths = tuple(int(v) for v in model_sec.get("dense", "16").split())
    graph = LayerGraph(
        front_end=FrontEndSpec(
            n_filters=model_sec.getint("n_filters", 4),
            taps=model_sec.getint("taps", 65),
            stride=model_sec.getint("stride", 1),
            pool=model_sec.getint("pool", 8),
            norm=model_sec.getboolean("norms", True),
        ),
        conv_blocks=tuple(conv_blocks),
        dense_widths=dense_widths,
        n_classes=n_classes,
        input_samples=task.chunk,
        sample_rate=task.sample_rate,
        dense_norm=model_sec.getboolean("norms", True),
    )
    family = FilterFamily(model_sec.get("family", "gabor-complex"))

    cfg = TrainConfig(
        batch_size=train_sec.getint("batch_size", 128),
        epochs=train_sec.getint("epochs", 20),
        lr=train_sec.getfloat("lr", 0.2),
        anneal_factor=train_sec.getfloat("anneal_factor", 0.5),
        anneal_threshold=train_sec.getfloat("anneal_threshold", 0.001),
        dropout_p=train_sec.getfloat("dropout", 0.15),
        seed=train_sec.getint("seed", 0),
        chunk_ms=train_sec.getfloat("chunk_ms", 200.0),
        overlap_ms=train_sec.getfloat("overlap_ms", 10.0),
    )
    counts = {
        "n_train": train_sec.getint("n_train", 2000),
        "n_valid": train_sec.getint("n_valid", 500),
        "n_test": train_sec.getint("n_test", 500),
    }
    return task, graph, family, cfg, counts
