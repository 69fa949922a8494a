"""Synthetic faces, landmark morphing, dataset splits and raster I/O."""

from .dataset import (
    Dataset,
    SplitSpec,
    build_dataset,
    in_memory_partition,
    load_partition,
    read_manifest,
    split_subjects,
    verify_disjoint,
    write_dataset,
)
from .faces import BONA_FIDE, LANDMARK_NAMES, MORPH, TRIANGLES, FaceSample, generate_subject
from .morph import morph_images, morph_pair, warp_image
from .netpbm import read_raster, write_raster
