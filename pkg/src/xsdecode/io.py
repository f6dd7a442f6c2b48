"""File formats, epoched-tensor vectorization, and standardization.

Two on-disk formats live here. A dataset is a directory: a `manifest.txt` of
key=value lines, one raw float64 little-endian matrix per subject, and one
labels CSV per subject. An epoched tensor is a single file: a key=value text
header (shape, ordering, labels), a blank line, then the raw float64
little-endian payload in trial-channel-timepoint order. Text for audit,
binary for bit-exactness.

Inputs are assumed pre-filtered and epoched; no signal processing happens
here beyond optional block-mean decimation in vectorize().
"""

import csv
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import MultiSubjectDataset, SubjectDataset, fingerprint

__all__ = [
    "EpochedTensor",
    "DatasetManifest",
    "vectorize",
    "standardize",
    "feature_stats",
    "apply_stats",
    "save_tensor",
    "load_tensor",
    "save_dataset",
    "load_dataset",
    "read_manifest",
    "save_subject_params",
    "load_subject_params",
]

FORMAT_VERSION = 1
_TENSOR_MAGIC = "epoched-tensor-v1"
_TENSOR_ORDER = "trial,channel,timepoint"


class EpochedTensor:
    """One subject's epoched recordings: trials x channels x timepoints."""

    def __init__(self, subject_id, data, labels):
        data = np.asarray(data, dtype=np.float64)
        labels = np.asarray(labels)
        if data.ndim != 3:
            raise ValueError("tensor must be 3-way, got shape %r"
                             % (data.shape,))
        if labels.shape != (data.shape[0],):
            raise ValueError(
                "got %d labels for %d trials" % (labels.size, data.shape[0]))
        if not np.all(np.isin(labels, (0, 1))):
            raise ValueError("labels must be 0 or 1")
        self.subject_id = int(subject_id)
        self.data = data
        self.labels = labels.astype(np.int64)

    @property
    def n_trials(self):
        return self.data.shape[0]

    @property
    def n_channels(self):
        return self.data.shape[1]

    @property
    def n_timepoints(self):
        return self.data.shape[2]


def vectorize(tensor, decimate=1):
    """Flatten an epoched tensor into a SubjectDataset.

    With decimate > 1, consecutive groups of `decimate` timepoints are
    averaged first (block mean; a crude anti-alias). A trailing remainder
    that does not fill a block is dropped with a warning. Features are laid
    out channel-major: feature index = channel * t' + timepoint, where t' is
    the post-decimation timepoint count.
    """
    if decimate < 1:
        raise ValueError("decimate must be >= 1, got %d" % decimate)
    n, c, t = tensor.data.shape
    t_used = (t // decimate) * decimate
    if t_used == 0:
        raise ValueError("decimate=%d exceeds %d timepoints" % (decimate, t))
    if t_used < t:
        warnings.warn(
            "dropping %d trailing timepoints not filling a block of %d"
            % (t - t_used, decimate))
    blocks = tensor.data[:, :, :t_used].reshape(n, c, t_used // decimate,
                                                decimate)
    flat = blocks.mean(axis=3).reshape(n, c * (t_used // decimate))
    return SubjectDataset(tensor.subject_id, flat, tensor.labels)


def feature_stats(X):
    """Per-feature (mean, scale); zero-deviation features get scale 1."""
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0
    return mean, scale


def apply_stats(X, mean, scale):
    return (X - mean) / scale


def standardize(train, apply_to=()):
    """Standardize with train-side statistics only.

    Parameters are the pooled per-feature mean and standard deviation of
    `train` (a MultiSubjectDataset). They are applied to `train` and to every
    dataset in `apply_to` (SubjectDataset or MultiSubjectDataset), never
    refitted. Returns (standardized train, list of standardized apply_to,
    mean, scale).
    """
    stacked = np.concatenate(
        [train.subject(s).features for s in train.subject_ids], axis=0)
    mean, scale = feature_stats(stacked)

    def _one(ds):
        if isinstance(ds, SubjectDataset):
            return SubjectDataset(ds.subject_id,
                                  apply_stats(ds.features, mean, scale),
                                  ds.labels)
        return MultiSubjectDataset([_one(ds.subject(s))
                                    for s in ds.subject_ids])

    return _one(train), [_one(ds) for ds in apply_to], mean, scale


# ---------------------------------------------------------------------------
# epoched tensor files


def save_tensor(tensor, path):
    header = [
        "format=%s" % _TENSOR_MAGIC,
        "subject=%d" % tensor.subject_id,
        "trials=%d" % tensor.n_trials,
        "channels=%d" % tensor.n_channels,
        "timepoints=%d" % tensor.n_timepoints,
        "order=%s" % _TENSOR_ORDER,
        "labels=%s" % ",".join(str(v) for v in tensor.labels),
    ]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n\n").encode("ascii"))
        fh.write(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())


def load_tensor(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    sep = raw.find(b"\n\n")
    if sep < 0:
        raise ValueError("%s: no header/payload separator" % path)
    fields = {}
    for line in raw[:sep].decode("ascii").splitlines():
        key, _, value = line.partition("=")
        fields[key] = value
    if fields.get("format") != _TENSOR_MAGIC:
        raise ValueError("%s: not an epoched tensor file" % path)
    if fields.get("order", _TENSOR_ORDER) != _TENSOR_ORDER:
        raise ValueError("%s: unsupported ordering %r" % (path, fields["order"]))
    shape = tuple(int(fields[k]) for k in ("trials", "channels", "timepoints"))
    payload = np.frombuffer(raw[sep + 2:], dtype="<f8")
    if payload.size != shape[0] * shape[1] * shape[2]:
        raise ValueError(
            "%s: header shape %r wants %d values, payload has %d"
            % (path, shape, shape[0] * shape[1] * shape[2], payload.size))
    labels = [int(v) for v in fields["labels"].split(",")] if fields["labels"] else []
    return EpochedTensor(int(fields["subject"]),
                         payload.reshape(shape).copy(), labels)


# ---------------------------------------------------------------------------
# dataset directories


@dataclass
class DatasetManifest:
    """Parsed manifest.txt: who is in the dataset and where the bytes live."""

    format_version: int
    d: int
    subjects: list  # of (subject_id, features_file, labels_file, n_trials)
    fingerprint: str
    channels: int = None
    timepoints: int = None
    metadata: dict = field(default_factory=dict)


def _subject_basenames(sid):
    return "subject_%d.bin" % sid, "subject_%d_labels.csv" % sid


def save_dataset(dataset, path, channels=None, timepoints=None, metadata=None):
    """Write a dataset directory; returns its fingerprint."""
    if channels is not None and timepoints is not None:
        if channels * timepoints != dataset.d:
            raise ValueError("channels*timepoints = %d but d = %d"
                             % (channels * timepoints, dataset.d))
    os.makedirs(path, exist_ok=True)
    lines = [
        "format_version=%d" % FORMAT_VERSION,
        "d=%d" % dataset.d,
        "n_subjects=%d" % dataset.n_subjects,
    ]
    if channels is not None:
        lines.append("channels=%d" % channels)
    if timepoints is not None:
        lines.append("timepoints=%d" % timepoints)
    for key, value in sorted((metadata or {}).items()):
        lines.append("meta_%s=%s" % (key, value))
    for sid in dataset.subject_ids:
        sub = dataset.subject(sid)
        feat_name, lab_name = _subject_basenames(sid)
        with open(os.path.join(path, feat_name), "wb") as fh:
            fh.write(np.ascontiguousarray(sub.features, dtype="<f8").tobytes())
        with open(os.path.join(path, lab_name), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["trial_index", "label"])
            for i, lab in enumerate(sub.labels):
                writer.writerow([i, int(lab)])
        lines.append("subject_%d_features=%s" % (sid, feat_name))
        lines.append("subject_%d_labels=%s" % (sid, lab_name))
        lines.append("subject_%d_trials=%d" % (sid, sub.n_trials))
    digest = fingerprint(dataset)
    lines.append("fingerprint=%s" % digest)
    with open(os.path.join(path, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return digest


def read_manifest(path):
    manifest_path = os.path.join(path, "manifest.txt")
    if not os.path.exists(manifest_path):
        raise FileNotFoundError("%s: no manifest.txt" % path)
    fields = {}
    with open(manifest_path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, value = line.partition("=")
            fields[key] = value
    version = int(fields["format_version"])
    if version > FORMAT_VERSION:
        raise ValueError("manifest format_version %d is newer than supported %d"
                         % (version, FORMAT_VERSION))
    d = int(fields["d"])
    sids = sorted(int(k[len("subject_"):-len("_trials")])
                  for k in fields if k.startswith("subject_") and
                  k.endswith("_trials"))
    if len(sids) != int(fields["n_subjects"]):
        raise ValueError("manifest lists %d subjects, n_subjects says %s"
                         % (len(sids), fields["n_subjects"]))
    subjects = [(sid,
                 fields["subject_%d_features" % sid],
                 fields["subject_%d_labels" % sid],
                 int(fields["subject_%d_trials" % sid])) for sid in sids]
    channels = int(fields["channels"]) if "channels" in fields else None
    timepoints = int(fields["timepoints"]) if "timepoints" in fields else None
    if channels is not None and timepoints is not None:
        if channels * timepoints != d:
            raise ValueError("manifest factorization %dx%d does not equal d=%d"
                             % (channels, timepoints, d))
    meta = {k[len("meta_"):]: v for k, v in fields.items()
            if k.startswith("meta_")}
    return DatasetManifest(version, d, subjects, fields.get("fingerprint", ""),
                           channels, timepoints, meta)


def load_dataset(path):
    """Load a dataset directory, validating against its manifest.

    Shape or count mismatches raise with the offending subject named; a
    fingerprint mismatch is a warning (the data may still be usable, but
    reproducibility claims keyed on the recorded fingerprint will not hold).
    """
    manifest = read_manifest(path)
    subjects = []
    for sid, feat_name, lab_name, n_trials in manifest.subjects:
        feat_path = os.path.join(path, feat_name)
        lab_path = os.path.join(path, lab_name)
        for p in (feat_path, lab_path):
            if not os.path.exists(p):
                raise FileNotFoundError(
                    "subject %d: missing file %s" % (sid, p))
        payload = np.fromfile(feat_path, dtype="<f8")
        if payload.size != n_trials * manifest.d:
            raise ValueError(
                "subject %d: %s has %d values, manifest wants %d trials x %d"
                % (sid, feat_name, payload.size, n_trials, manifest.d))
        features = payload.reshape(n_trials, manifest.d)
        labels = np.empty(n_trials, dtype=np.int64)
        with open(lab_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["trial_index", "label"]:
                raise ValueError("subject %d: bad labels header %r"
                                 % (sid, header))
            count = 0
            for row in reader:
                labels[int(row[0])] = int(row[1])
                count += 1
        if count != n_trials:
            raise ValueError("subject %d: %d label rows, manifest wants %d"
                             % (sid, count, n_trials))
        subjects.append(SubjectDataset(sid, features, labels))
    dataset = MultiSubjectDataset(subjects)
    if manifest.fingerprint and fingerprint(dataset) != manifest.fingerprint:
        warnings.warn("%s: content fingerprint does not match manifest" % path)
    return dataset


# ---------------------------------------------------------------------------
# subject parameters (for post-hoc oracle evaluation)


def save_subject_params(params_list, path):
    os.makedirs(path, exist_ok=True)
    for p in params_list:
        np.savetxt(os.path.join(path, "subject_%d_A.txt" % p.subject_id),
                   p.A, fmt="%.17g")
        np.savetxt(os.path.join(path, "subject_%d_b.txt" % p.subject_id),
                   np.atleast_1d(p.b), fmt="%.17g")


def load_subject_params(path, subject_ids):
    from .synth import SubjectParams

    out = []
    for sid in subject_ids:
        A = np.loadtxt(os.path.join(path, "subject_%d_A.txt" % sid), ndmin=2)
        b = np.loadtxt(os.path.join(path, "subject_%d_b.txt" % sid), ndmin=1)
        out.append(SubjectParams(sid, A, b))
    return out
