"""
Datasets and parametrized expression templates for data-based model equations
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
import io
import re
from typing import Sequence

import numpy as np
import pandas as pd

from ..util.errors import SchemaError, UsageError

__all__ = [
    'MAX_EXPONENT',
    'Dataset',
    'ExpressionTemplate',
    'LinearTemplate',
    'PolynomialTemplate',
    'MultivariateQuadraticTemplate',
    'QuadPlusLogTemplate',
    'LogisticTemplate',
    'TEMPLATE_NAMES',
    'get_template',
]

# Exponents are clipped to this magnitude before exp
MAX_EXPONENT = 700.0

@dataclass(frozen=True)
class Dataset:
    """
    Input-output samples for fitting one equation

    Args:
        features (tuple[str, ...]): Names of the input columns
        inputs (np.ndarray): samples x features matrix
        targets (np.ndarray): Target vector
        target (optional str default: 'y'): Name of the target column
    """
    features: tuple[str, ...]
    inputs: np.ndarray
    targets: np.ndarray
    target: str = 'y'

    def __post_init__(self) -> None:
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs.reshape(-1, 1)
        targets = np.asarray(self.targets, dtype=float).reshape(-1)
        object.__setattr__(self, 'inputs', inputs)
        object.__setattr__(self, 'targets', targets)
        object.__setattr__(self, 'features', tuple(self.features))
        if len(set(self.features)) != len(self.features):
            raise UsageError(f'Feature names must be unique, got {list(self.features)}')
        if inputs.shape != (targets.shape[0], len(self.features)):
            raise UsageError(
                f'Inputs of shape {inputs.shape} do not match {targets.shape[0]} targets and '
                f'{len(self.features)} features'
            )
        if targets.shape[0] < 2:
            raise UsageError(f'A dataset needs at least 2 samples, got {targets.shape[0]}')
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
            raise UsageError('Dataset contains non-finite values')

    def __len__(self) -> int:
        return self.targets.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.inputs[:, self.features.index(name)]

    def split(self, test_fraction: float) -> tuple['Dataset', 'Dataset | None']:
        """
        Hold out the trailing fraction of samples as test data

        Args:
            test_fraction (float): Fraction in [0, 1) of samples to hold out

        Returns:
            tuple[Dataset, Dataset | None]: The calibration set and the test set, None when
            test_fraction is 0
        """
        if not 0.0 <= test_fraction < 1.0:
            raise UsageError(f'test_fraction must be in [0, 1), got {test_fraction!r}')
        n_test = int(round(len(self) * test_fraction))
        if n_test == 0:
            return self, None
        n_calib = len(self) - n_test
        calib = Dataset(self.features, self.inputs[:n_calib], self.targets[:n_calib], self.target)
        test = Dataset(self.features, self.inputs[n_calib:], self.targets[n_calib:], self.target)
        return calib, test

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        target: str,
        features: Sequence[str] | None = None,
        source: str = '<dataset>'
    ) -> 'Dataset':
        """
        Build from a data frame

        Args:
            frame (pd.DataFrame): The samples, one column per variable
            target (str): Name of the target column
            features (optional Sequence[str] | None default: None): Feature columns, every other
            column if not present
            source (optional str default: '<dataset>'): Name reported in errors

        Raises:
            SchemaError: If a column is missing or not numeric
        """
        columns = [str(col) for col in frame.columns]
        if target not in columns:
            raise SchemaError(f'Missing target column "{target}"', source=source, line=1)
        features = list(features) if features is not None else [
            col for col in columns if col != target
        ]
        for name in features:
            if name not in columns:
                raise SchemaError(f'Missing feature column "{name}"', source=source, line=1)
        try:
            inputs = frame[features].to_numpy(dtype=float)
            targets = frame[target].to_numpy(dtype=float)
        except (TypeError, ValueError) as err:
            raise SchemaError(f'Non-numeric value: {err}', source=source) from err
        bad = ~(np.all(np.isfinite(inputs), axis=1) & np.isfinite(targets))
        if bad.any():
            row = int(np.argmax(bad))
            # Header is line 1
            raise SchemaError('Non-finite value', source=source, line=row + 2)
        return cls(tuple(features), inputs, targets, target)

    @classmethod
    def from_csv(
        cls,
        text: str,
        target: str,
        features: Sequence[str] | None = None,
        source: str = '<dataset>'
    ) -> 'Dataset':
        """
        Build from CSV text: comma separated, '.' decimal, header row with the column names
        """
        try:
            frame = pd.read_csv(io.StringIO(text), sep=',', decimal='.', thousands=None)
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as err:
            raise SchemaError(f'Invalid CSV: {err}', source=source) from err
        return cls.from_frame(frame, target, features, source)

class ExpressionTemplate(ABC):
    """
    A parametrized expression y = f(x; params) selected by the modeller for one equation
    """

    name: str = ''
    # Whether f is linear in params, in which case design() is defined
    linear: bool = False

    def check(self, n_features: int) -> None:
        """
        Raise UsageError if the template cannot take n_features inputs
        """

    @abstractmethod
    def param_names(self, features: Sequence[str]) -> list[str]:
        """
        Names of the parameters, their count is the template arity
        """

    @abstractmethod
    def evaluate(self, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        """
        Evaluate the expression for every sample row of inputs
        """

    def jacobian(self, params: np.ndarray, inputs: np.ndarray) -> np.ndarray | None:
        """
        Analytic d f / d params (samples x params) or None to use finite differences
        """
        if self.linear:
            return self.design(inputs)
        return None

    def design(self, inputs: np.ndarray) -> np.ndarray:
        """
        Design matrix of a template linear in its parameters
        """
        raise UsageError(f'Template "{self.name}" is not linear in its parameters')

    def arity(self, features: Sequence[str]) -> int:
        return len(self.param_names(features))

class _SingleFeature(ExpressionTemplate): #pylint: disable=abstract-method
    def check(self, n_features: int) -> None:
        if n_features != 1:
            raise UsageError(f'Template "{self.name}" takes exactly 1 feature, got {n_features}')

class LinearTemplate(ExpressionTemplate):
    """
    y = sum(b_j * x_j) + intercept
    """
    name = 'linear'
    linear = True

    def param_names(self, features: Sequence[str]) -> list[str]:
        return [*features, 'intercept']

    def design(self, inputs: np.ndarray) -> np.ndarray:
        return np.column_stack([inputs, np.ones(inputs.shape[0])])

    def evaluate(self, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        return self.design(inputs) @ params

class PolynomialTemplate(_SingleFeature):
    """
    y = c_0 * x^d + ... + c_{d-1} * x + c_d, coefficients in descending powers

    Args:
        degree (int): Polynomial degree >= 1
    """
    linear = True

    def __init__(self, degree: int) -> None:
        if degree < 1:
            raise UsageError(f'Polynomial degree must be >= 1, got {degree}')
        self.degree = degree
        self.name = 'quadratic' if degree == 2 else f'polynomial:{degree}'

    def param_names(self, features: Sequence[str]) -> list[str]:
        feature = features[0] if features else 'x'
        return [
            (f'{feature}^{power}' if power > 1 else feature if power == 1 else 'intercept')
            for power in range(self.degree, -1, -1)
        ]

    def design(self, inputs: np.ndarray) -> np.ndarray:
        return np.vander(inputs[:, 0], self.degree + 1)

    def evaluate(self, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        return np.polyval(params, inputs[:, 0])

class MultivariateQuadraticTemplate(ExpressionTemplate):
    """
    y = sum(a_j * x_j^2) + sum(b_j * x_j), without intercept
    """
    name = 'multivariate-quadratic'
    linear = True

    def param_names(self, features: Sequence[str]) -> list[str]:
        return [f'{feature}^2' for feature in features] + list(features)

    def design(self, inputs: np.ndarray) -> np.ndarray:
        return np.column_stack([inputs ** 2, inputs])

    def evaluate(self, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        return self.design(inputs) @ params

class QuadPlusLogTemplate(_SingleFeature):
    """
    y = a*q^2 + b*q + c + d*ln(e*q), the log term is dropped where e <= 0 or q <= 0
    """
    name = 'quad-plus-log'

    def param_names(self, features: Sequence[str]) -> list[str]:
        return ['a', 'b', 'c', 'd', 'e']

    @staticmethod
    def _log_term(e: float, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mask = (q > 0.0) if e > 0.0 else np.zeros(q.shape, dtype=bool)
        log_eq = np.zeros(q.shape)
        log_eq[mask] = np.log(e * q[mask])
        return log_eq, mask

    def evaluate(self, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        a, b, c, d, e = params
        q = inputs[:, 0]
        log_eq, _ = self._log_term(e, q)
        return a * q ** 2 + b * q + c + d * log_eq

    def jacobian(self, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        _, _, _, d, e = params
        q = inputs[:, 0]
        log_eq, mask = self._log_term(e, q)
        d_e = np.where(mask, d / e if e > 0.0 else 0.0, 0.0)
        return np.column_stack([q ** 2, q, np.ones(q.shape), log_eq, d_e])

class LogisticTemplate(_SingleFeature):
    """
    y = a / (b + exp(c*x + d)) + f
    """
    name = 'logistic'

    def param_names(self, features: Sequence[str]) -> list[str]:
        return ['numerator', 'offset', 'slope', 'shift', 'floor']

    def evaluate(self, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        a, b, c, d, f = params
        ex = np.exp(np.clip(c * inputs[:, 0] + d, -MAX_EXPONENT, MAX_EXPONENT))
        return a / (b + ex) + f

    def jacobian(self, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        a, b, c, d, _ = params
        x = inputs[:, 0]
        ex = np.exp(np.clip(c * x + d, -MAX_EXPONENT, MAX_EXPONENT))
        den = b + ex
        d_den = -a / den ** 2
        return np.column_stack([1.0 / den, d_den, d_den * ex * x, d_den * ex, np.ones(x.shape)])

TEMPLATE_NAMES = ('linear', 'quadratic', 'polynomial:<degree>', 'multivariate-quadratic',
                  'quad-plus-log', 'logistic')

def get_template(name: str) -> ExpressionTemplate:
    """
    Look up a template by name

    Args:
        name (str): One of TEMPLATE_NAMES

    Returns:
        ExpressionTemplate: A new template instance

    Raises:
        UsageError: If the name is unknown
    """
    match = re.fullmatch(r'polynomial:(\d+)', name)
    if match is not None:
        return PolynomialTemplate(int(match.group(1)))
    templates: dict[str, type[ExpressionTemplate]] = {
        'linear': LinearTemplate,
        'multivariate-quadratic': MultivariateQuadraticTemplate,
        'quad-plus-log': QuadPlusLogTemplate,
        'logistic': LogisticTemplate,
    }
    if name == 'quadratic':
        return PolynomialTemplate(2)
    if name not in templates:
        raise UsageError(f'Unknown template "{name}". Expected one of: {", ".join(TEMPLATE_NAMES)}')
    return templates[name]()
