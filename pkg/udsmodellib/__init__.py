#pylint: disable=missing-module-docstring
VERSION = '0.1.0'
