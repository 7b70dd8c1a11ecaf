"""Stable hashes and a process-wide table of finite-difference coefficients.
"""

import hashlib
import json
import threading
import logging
import typing


def stable_hash(data: typing.Any, length: int = 16) -> str:
    """Hash JSON-serializable data independent of dict ordering.

Floats are written with repr so equal values always hash equally.

>>> stable_hash({'b': 1, 'a': 0.5}) == stable_hash({'a': 0.5, 'b': 1})
True
>>> len(stable_hash([1, 2, 3]))
16
    """
    text = json.dumps(data, sort_keys=True, default=json_default)
    digest = hashlib.sha256(text.encode('utf8')).hexdigest()
    return digest[:length]


def json_default(value):
    if hasattr(value, 'tolist'):
        return value.tolist()
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    raise TypeError('Cannot hash %r of type %s' % (value, type(value)))


def params_key(distance: int, rounds: int, params) -> str:
    """Key identifying a memory experiment and its noise parameters.

    :param distance:  Code distance of the circuit.

    :param rounds:  Number of syndrome rounds.

    :param params:  LcpemParams (anything with to_dict works).

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  Hex string. Rates are rounded to 12 significant digits so
              values that only differ by float noise share a key.
    """
    rounded = {name: float('%.12g' % value)
               for name, value in params.to_dict().items()}
    return stable_hash({'distance': int(distance), 'rounds': int(rounds),
                        'params': rounded})


class CoefficientCache:
    """Intern finite-difference coefficient sets by params_key.

Lookups and stores are guarded by one lock so worker threads of a
sweep can share estimates.

>>> from fluxqec.core import cache_tools
>>> cache_tools.CoefficientCache.store('abc', [1.0, 2.0])
>>> cache_tools.CoefficientCache.lookup('abc')
[1.0, 2.0]
>>> cache_tools.CoefficientCache.lookup('missing') is None
True
    """

    _lock = threading.Lock()
    _table = {}

    @classmethod
    def store(cls, key: str, value: typing.Any):
        "Remember value under key, replacing anything older."
        with cls._lock:
            if key in cls._table:
                logging.debug('Replacing cached coefficients for %s', key)
            cls._table[key] = value

    @classmethod
    def lookup(cls, key: str) -> typing.Optional[typing.Any]:
        "Return what store saved under key, or None."
        with cls._lock:
            return cls._table.get(key)

    @classmethod
    def clear(cls):
        "Forget every entry."
        with cls._lock:
            cls._table.clear()
