"""``VSDB`` database files: magic, version u32, then CRC-checked sections
``CONF`` (camera, settings, id counters), ``VOCB``, ``KFRM``, ``MPTS`` and ``EDGE``."""

import json
import logging
from pathlib import Path
from typing import Union

import numpy as np

from surfelreloc.descriptors.features import DESCRIPTOR_BYTES, FrameFeatures
from surfelreloc.descriptors.vocabulary import VocabularyError
from surfelreloc.geometry.camera import PinholeCamera
from surfelreloc.geometry.se3 import SE3Pose
from surfelreloc.mapping.covisibility import CovisibilityGraph
from surfelreloc.mapping.database import (
    DatabaseSettings,
    Keyframe,
    MapPoint,
    VisualDatabase,
    check_integrity,
    database_stats,
)

from .binary_io import ByteReader, ByteWriter, pack_sections, require_sections, unpack_sections
from .utils import write_bytes_atomic
from .vocabulary_io import decode_vocabulary, encode_vocabulary

logger = logging.getLogger(__name__)

VSDB_MAGIC = b"VSDB"
VSDB_VERSION = 1
_SECTIONS = [b"CONF", b"VOCB", b"KFRM", b"MPTS", b"EDGE"]


class DatabaseFormatError(ValueError):
    """Raised for corrupt, truncated or version-mismatched database files."""


def _encode_keyframes(db: VisualDatabase) -> bytes:
    w = ByteWriter()
    w.pack("Q", len(db.keyframes))
    for kf_id in sorted(db.keyframes):
        kf = db.keyframes[kf_id]
        f = kf.features
        w.pack("qd", kf.id, kf.timestamp)
        w.array(kf.pose.to_vector(), "f8")
        w.pack("I", len(f))
        w.array(f.uv, "f8")
        w.array(f.sizes, "f8")
        w.array(f.octaves, "i4")
        w.array(f.descriptors, "u1")
        w.array(kf.point_ids, "i8")
        w.array(kf.surfel_ids, "i8")
        w.array(kf.words, "i8")
        w.pack("I", f.global_descriptor.shape[0])
        w.array(f.global_descriptor, "f8")
        for nbrs in kf.neighbors:
            w.pack("I", len(nbrs))
            w.array(sorted(nbrs), "i8")
    return w.getvalue()


def _encode_points(db: VisualDatabase) -> bytes:
    w = ByteWriter()
    w.pack("Q", len(db.points))
    for pid in sorted(db.points):
        p = db.points[pid]
        w.pack("q", p.id)
        w.array(p.position, "f8")
        w.pack("q", p.surfel_id)
        w.array(p.descriptor, "u1")
        w.pack("qI", p.creation_frame, len(p.observations))
        for kf_id, idx in p.observations.items():
            w.pack("qI", kf_id, idx)
    return w.getvalue()


def _encode_edges(db: VisualDatabase) -> bytes:
    edges = db.covisibility.edges()
    w = ByteWriter()
    w.pack("Q", len(edges))
    for a, b, weight in edges:
        w.pack("qqI", a, b, weight)
    return w.getvalue()


def encode_database(db: VisualDatabase) -> bytes:
    conf = {
        "camera": db.camera.to_dict(),
        "settings": db.settings.to_dict(),
        "next_keyframe_id": db.next_keyframe_id,
        "next_point_id": db.next_point_id,
        "recent_points": sorted([int(p), int(c)] for p, c in db.recent_points.items()),
        "stats": dict(database_stats(db)),
    }
    return pack_sections(
        VSDB_MAGIC,
        VSDB_VERSION,
        [
            (b"CONF", json.dumps(conf, sort_keys=True).encode()),
            (b"VOCB", encode_vocabulary(db.vocabulary)),
            (b"KFRM", _encode_keyframes(db)),
            (b"MPTS", _encode_points(db)),
            (b"EDGE", _encode_edges(db)),
        ],
    )


def _decode_keyframes(payload: bytes):
    r = ByteReader(payload, DatabaseFormatError, "keyframe section")
    keyframes = {}
    for _ in range(r.scalar("Q")):
        kf_id, timestamp = r.unpack("qd")
        pose = SE3Pose.from_vector(r.array(7, "f8"))
        n = r.scalar("I")
        uv = r.array(2 * n, "f8", (n, 2))
        sizes = r.array(n, "f8")
        octaves = r.array(n, "i4")
        descriptors = r.array(n * DESCRIPTOR_BYTES, "u1", (n, DESCRIPTOR_BYTES))
        point_ids = r.array(n, "i8")
        surfel_ids = r.array(n, "i8")
        words = r.array(n, "i8")
        global_descriptor = r.array(r.scalar("I"), "f8")
        neighbors = tuple(frozenset(r.array(r.scalar("I"), "i8").tolist()) for _ in range(n))
        features = FrameFeatures(uv, sizes, octaves, descriptors, timestamp, global_descriptor)
        keyframes[kf_id] = Keyframe(kf_id, timestamp, pose, features, point_ids, surfel_ids, neighbors, words)
    r.expect_end()
    return keyframes


def _decode_points(payload: bytes):
    r = ByteReader(payload, DatabaseFormatError, "map point section")
    points = {}
    for _ in range(r.scalar("Q")):
        pid = r.scalar("q")
        position = r.array(3, "f8")
        surfel_id = r.scalar("q")
        descriptor = r.array(DESCRIPTOR_BYTES, "u1")
        creation, n_obs = r.unpack("qI")
        observations = {}
        for _ in range(n_obs):
            kf_id, idx = r.unpack("qI")
            observations[kf_id] = idx
        points[pid] = MapPoint(pid, position, surfel_id, descriptor, creation, observations)
    r.expect_end()
    return points


def _decode_edges(payload: bytes) -> CovisibilityGraph:
    r = ByteReader(payload, DatabaseFormatError, "edge section")
    return CovisibilityGraph.from_edges(r.unpack("qqI") for _ in range(r.scalar("Q")))


def decode_database(data: bytes) -> VisualDatabase:
    sections = unpack_sections(data, VSDB_MAGIC, VSDB_VERSION, DatabaseFormatError)
    require_sections(sections, _SECTIONS, DatabaseFormatError)
    try:
        conf = json.loads(sections[b"CONF"])
        camera = PinholeCamera(**conf["camera"])
        settings = DatabaseSettings(**conf["settings"])
        vocabulary = decode_vocabulary(sections[b"VOCB"])
        keyframes = _decode_keyframes(sections[b"KFRM"])
        points = _decode_points(sections[b"MPTS"])
        covisibility = _decode_edges(sections[b"EDGE"])
    except DatabaseFormatError:
        raise
    except (KeyError, TypeError, ValueError, VocabularyError) as exc:
        raise DatabaseFormatError(f"Corrupt database payload: {exc}") from exc

    db = VisualDatabase(camera, vocabulary, settings)
    db.keyframes = keyframes
    db.points = points
    db.covisibility = covisibility
    db.next_keyframe_id = int(conf["next_keyframe_id"])
    db.next_point_id = int(conf["next_point_id"])
    db.recent_points = {int(p): int(c) for p, c in conf["recent_points"]}
    try:
        db.rebuild_derived()
        problems = check_integrity(db)
    except (KeyError, IndexError) as exc:
        raise DatabaseFormatError(f"Inconsistent database references: {exc}") from exc
    if problems:
        raise DatabaseFormatError(f"Inconsistent database: {problems[0]} ({len(problems)} issues)")
    return db


def save_database(path: Union[str, Path], db: VisualDatabase) -> None:
    write_bytes_atomic(path, encode_database(db))
    logger.info("Saved database with %d keyframes and %d map points to %s", len(db.keyframes), len(db.points), path)


def load_database(path: Union[str, Path]) -> VisualDatabase:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Database not found: {path}")
    db = decode_database(path.read_bytes())
    logger.info("Loaded database with %d keyframes from %s", len(db.keyframes), path)
    return db
