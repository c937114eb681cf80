class OpensysError(Exception):
  pass


class ContractViolation(OpensysError, ValueError):
  """Arguments break an operation's precondition (shapes, stochasticity, ranges)."""
  pass


class ConfigError(OpensysError, ValueError):
  pass


class EnvironmentTooLarge(OpensysError):
  def __init__(self, what: str, size: int, cap: int, hint: str = ""):
    self.what = what
    self.size = size
    self.cap = cap
    message = f"{what}: environment too large ({size} points, cap {cap})"
    if hint: message += f". {hint}"
    super().__init__(message)


class FlowExplosion(OpensysError):
  def __init__(self, step: int, path: int = 0):
    self.step = step
    self.path = path
    super().__init__(f"Non-finite state at step {step} (path {path})")


class MissingDerivative(OpensysError):
  def __init__(self, observable: str):
    self.observable = observable
    super().__init__(f"Observable '{observable}' has no registered derivatives")
