"""
File access utilities
"""

from functools import cache
import os
from typing import Any

import boto3
from requests import request

from .errors import UsageError

__all__ = [
    'HTTP_TIMEOUT',
    'split_uri',
    'get_file',
    'get_text',
    'file_exists',
    'save_file',
    'save_text',
    'join_path',
]

HTTP_TIMEOUT = float(os.environ.get('UDS_HTTP_TIMEOUT', '10'))

@cache
def _s3_client() -> Any:
    return boto3.client('s3')

def split_uri(path: str) -> tuple[str, str]:
    """
    Split a path into its protocol and the rest

    Args:
        path (str): <protocol>://<uri> or a plain local path

    Returns:
        tuple[str, str]: The lower-cased protocol ('file' for plain paths) and the uri
    """
    protocol, uri = path.split('://', 1) if '://' in path else ('file', path)
    return protocol.lower(), uri

def get_file(path: str) -> bytes:
    """
    Get a file's contents from the local file system, S3, or an HTTP(S) Server

    Args:
        path (str): The path to the file. If no protocol is indicated by the path then it is assumed
        to be a local file path (ex. <protocol>://<uri> or <uri>)

    Raises:
        UsageError: If the protocol is not supported
        FileNotFoundError: If a local file does not exist
    """
    protocol, uri = split_uri(path)
    if protocol == 'file':
        with open(uri, 'rb') as file:
            return file.read()
    if protocol in ['http', 'https']:
        res = request('GET', path, timeout=HTTP_TIMEOUT)
        res.raise_for_status()
        return res.content
    if protocol == 's3':
        bucket, key = uri.split('/', 1)
        return _s3_client().get_object(Bucket=bucket, Key=key)['Body'].read()

    raise UsageError(f'Unsupported protocol "{protocol}"')

def get_text(path: str) -> str:
    """
    Get a UTF-8 text file's contents (see get_file)
    """
    return get_file(path).decode('utf-8')

def file_exists(path: str) -> bool:
    """
    Whether a local file exists, remote paths are assumed to exist and fail on access instead
    """
    protocol, uri = split_uri(path)
    return protocol != 'file' or os.path.exists(uri)

def save_file(path: str, contents: bytes, content_type: str = 'application/octet-stream') -> None:
    """
    Save a file's contents to the local file system, S3, or an HTTP(S) server

    Local parent directories are created as needed

    Args:
        path (str): The path to the file. If no protocol is indicated by the path then it is assumed
        to be a local file path (ex. <protocol>://<uri> or <uri>)
        contents (bytes): The file's contents
        content_type (optional str default: 'application/octet-stream'): The MIME content type of
        the file for use in the HTTP(S) request

    Raises:
        UsageError: If the protocol is not supported
    """
    protocol, uri = split_uri(path)
    if protocol == 'file':
        parent = os.path.dirname(uri)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(uri, 'wb') as file:
            file.write(contents)
        return
    if protocol in ['http', 'https']:
        res = request(
            'POST',
            path,
            headers={'Content-Type': content_type},
            data=contents,
            timeout=HTTP_TIMEOUT,
        )
        if not res.ok:
            request(
                'PUT',
                path,
                headers={'Content-Type': content_type},
                data=contents,
                timeout=HTTP_TIMEOUT,
            ).raise_for_status()
        return
    if protocol == 's3':
        bucket, key = uri.split('/', 1)
        _s3_client().put_object(Bucket=bucket, Key=key, Body=contents, ContentType=content_type)
        return

    raise UsageError(f'Unsupported protocol "{protocol}"')

def save_text(path: str, text: str, content_type: str = 'text/plain') -> None:
    """
    Save UTF-8 text with Unix newlines (see save_file)
    """
    save_file(path, text.encode('utf-8'), content_type=content_type)

def join_path(base: str, *parts: str) -> str:
    """
    Join path segments for local paths and URIs alike
    """
    protocol, _ = split_uri(base)
    if protocol == 'file':
        return os.path.join(base, *parts)
    return '/'.join([base.rstrip('/'), *parts])
