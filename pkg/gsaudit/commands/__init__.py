"""Commands module"""
