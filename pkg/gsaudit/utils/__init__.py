"""Utils module"""
from gsaudit.utils.config import settings
