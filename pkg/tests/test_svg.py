import xml.etree.ElementTree as ET

import numpy as np

from qdlab.raster import disc_raster
from qdlab.svg import chain_svg, contour_layer, mask_layer, node_layer, orbit_layer, render_svg


def test_empty_document_is_valid():
    ET.fromstring(render_svg([]))


def test_render_is_deterministic():
    K = disc_raster(0.2, 0.5, 1 / 64)
    layers = [mask_layer(K, "K"), node_layer([0.2], "centre"),
              orbit_layer([np.array([0, 0.1, 0.2 + 0.1j])], "orbit"),
              contour_layer([np.exp(2j * np.pi * np.arange(16) / 16)], "circle")]
    a, b = render_svg(layers, title="t"), render_svg(layers, title="t")
    assert a == b
    root = ET.fromstring(a)
    assert len(root.findall(".//{http://www.w3.org/2000/svg}circle")) == 1


def test_chain_labels():
    doc = chain_svg([disc_raster(0, 0.3, 1 / 64), disc_raster(0, 0.3, 1 / 64)], [0.1, 0.2])
    assert 'data-label="t=0.2"' in doc and 'data-label="t=0.1"' in doc
