"""Schemas module"""
from gsaudit.schemas.trace import EvaluatedOption, StepRecord, OptimizationTrace
from gsaudit.schemas.report import SettingRecord, SummaryRow, StudyReport, ReportMeta
from gsaudit.schemas.run_config import RunConfig, SimSpec
