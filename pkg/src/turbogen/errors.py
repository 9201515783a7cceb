"""Exception types shared across turbogen."""


class DomainError(ValueError):
    """An argument lies outside the representable band or index range."""


class ConfigError(ValueError):
    """A run configuration or circuit specification is invalid."""


class DumpError(IOError):
    """A binary dump or its sidecar is missing, corrupt or inconsistent."""


class UnphysicalFieldError(RuntimeError):
    """Too many grid points needed vacuum regularization."""
