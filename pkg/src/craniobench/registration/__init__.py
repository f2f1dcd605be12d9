from .rigid import Objective, estimate_rigid
from .icp import IcpSettings, AlignmentResult, icp_align
from .gasd import GasdDescriptor, gasd_descriptor
from .select import SelectionMode, TemplateEntry, select_templates

__all__ = [
    "Objective",
    "estimate_rigid",
    "IcpSettings",
    "AlignmentResult",
    "icp_align",
    "GasdDescriptor",
    "gasd_descriptor",
    "SelectionMode",
    "TemplateEntry",
    "select_templates",
]
