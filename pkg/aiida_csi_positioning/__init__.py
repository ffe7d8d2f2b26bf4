# -*- coding: utf-8 -*-
"""AiiDA plugin and toolkit for CNN fingerprint positioning with beamformed 5G mmWave CSI"""

__version__ = '0.1.0'
