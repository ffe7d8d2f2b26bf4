# -*- coding: utf-8 -*-
"""Initialize FingerprintBaseWorkChain"""
from .base import FingerprintBaseWorkChain, reduce_learning_rate
