"""Shared hypothesis strategies for random datasets."""

from __future__ import annotations

from hypothesis import strategies as st

from dicomvault import DataElement, Dataset, PIXEL_DATA, Tag

SHORT_VRS = ["ST", "UI", "CS", "LO", "SH", "PN", "DA", "US", "DS", "SS"]
LONG_VRS = ["OB", "OW", "UN"]


def even(b: bytes) -> bytes:
    return b if len(b) % 2 == 0 else b + b"\x00"


tags = st.builds(
    Tag,
    st.integers(0, 0xFFFF).filter(lambda g: g not in (0x0002, 0x7FE0, 0xFFFE)),
    st.integers(0, 0xFFFF),
)

elements = st.builds(
    DataElement,
    tags,
    st.sampled_from(SHORT_VRS + LONG_VRS),
    st.binary(max_size=48).map(even),
)

datasets = st.builds(
    lambda els, pixel: Dataset(elements=tuple(els) + pixel),
    st.lists(elements, max_size=12),
    st.one_of(
        st.just(()),
        st.binary(max_size=32).map(even).map(lambda b: (DataElement(PIXEL_DATA, "OW", b),)),
    ),
)
