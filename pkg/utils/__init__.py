#!/usr/bin/env python3
"""
rattle-dem Utils Package
Stateless helpers: geometry, material constants, files, console output, validation
"""

from .material_calculator import MaterialCalculator, MaterialCalculationError
from .geometry_utils import GeometryError
from .validation_framework import ValidationFramework
from .file_utils import FileUtils, FileOperationError
from .output_formatter import OutputFormatter
from .vtk_writer import VTKWriter

__all__ = [
    'MaterialCalculator',
    'MaterialCalculationError',
    'GeometryError',
    'ValidationFramework',
    'FileUtils',
    'FileOperationError',
    'OutputFormatter',
    'VTKWriter',
]
