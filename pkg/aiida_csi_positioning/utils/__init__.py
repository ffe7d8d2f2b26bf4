# -*- coding: utf-8 -*-
"""aiida-csi-positioning utils"""

from .input_generator import FingerprintInput
