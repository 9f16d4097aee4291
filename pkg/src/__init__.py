"""
GeoGlimpse - vision-based geo-localization from first-person image sequences.

Sequential variational models with a recurrent or causal transformer core turn a stream of
first-person views into an overhead map view and a geographic coordinate. A procedural
world with simulated RTK and phone GPS sensors provides the data.
"""
import logging

logger = logging.getLogger(__name__)

__version__ = '1.0.0'
