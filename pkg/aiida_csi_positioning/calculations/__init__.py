# -*- coding: utf-8 -*-
"""aiida-csi-positioning plugin"""
from .pipeline import FingerprintCalculation
