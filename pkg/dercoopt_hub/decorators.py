import functools
import inspect
import logging
import time
from typing import Any, Callable
from dercoopt_hub.logging_config import get_logger


logger = get_logger(__name__)


def _sized(value: Any) -> Any:
    """Length of a sequence argument, or the value itself for scalars"""
    try:
        return len(value)
    except TypeError:
        return value


def log_operation(level: int = logging.INFO, **context_args: str):
    """
    Decorator for logging domain operations

    Args:
        level: Log level used for successful calls
        context_args: Mapping of log field -> keyword argument name; sized
            arguments (paths, schedules) are logged by length
    """
    def decorator(func: Callable) -> Callable:
        signature = inspect.signature(func)

        @functools.wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            action = func.__name__.upper()
            start_time = time.perf_counter()
            result_status = "OK"
            error_info = None

            try:
                return func(*args, **kwargs)

            except Exception as e:
                result_status = "ERROR"
                error_info = {
                    "error_type": type(e).__name__,
                    "error_message": str(e)
                }
                raise  # Re-raise the exception

            finally:
                log_data = {
                    "action": action,
                    "result": result_status,
                    "duration_ms": round((time.perf_counter() - start_time) * 1000, 2)
                }
                try:
                    bound = signature.bind_partial(*args, **kwargs).arguments
                except TypeError:
                    bound = {}
                for field, arg_name in context_args.items():
                    if arg_name in bound:
                        log_data[field] = _sized(bound[arg_name])

                if error_info:
                    log_data.update(error_info)

                if result_status == "OK":
                    logger.log(level, "Operation completed", extra=log_data)
                else:
                    logger.error("Operation failed", extra=log_data)

        return wrapper
    return decorator
